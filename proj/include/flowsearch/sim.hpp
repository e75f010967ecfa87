#pragma once

// Simulated benchmarks: a latent accuracy (logistic over config features) and
// a closed-form expected cost, sampled per question with seeded noise.
//
// Spec file (JSON):
//   {"name": "...", "space": {...space schema...} | "builtin:desk-1",
//    "seed": 42, "num_questions": 100, "bias": -0.4,
//    "weights": {"llm": {"o3-mini": 0.9, ...}, ...},
//    "numeric": [{"param": "top_k", "linear": 0.5, "quadratic": -0.6, "center": 0.6}],
//    "interactions": [{"a": "prompt", "a_value": "cot", "b": "llm", "b_value": "o3-mini", "weight": -0.4},
//                     {"a": "retriever", "a_value": "fusion", "b": "top_k", "weight": 0.3}],
//    "cost": {"tier_param": "llm", "base": {"o3-mini": 0.0011, ...}, "latency_s": {"o3-mini": 4.0, ...},
//             "multipliers": {"flow": {"react_rag_agent": 2.5}}, "numeric": [{"param": "top_k", "slope": 1.5}],
//             "sigma": 0.3, "latency_sigma": 0.2},
//    "errors": {"gemini-flash": 0.01}}
//
// Numeric features are the parameter's min-max position x in [0, 1]. A
// numeric interaction (no b_value) contributes weight * x_b.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "flowsearch/csv.hpp"
#include "flowsearch/errors.hpp"
#include "flowsearch/harness.hpp"
#include "flowsearch/pareto.hpp"
#include "flowsearch/rng.hpp"
#include "flowsearch/space.hpp"
#include "flowsearch/space_io.hpp"

namespace flowsearch {

struct SimNumericTerm {
    std::string param;
    double linear = 0.0;
    double quadratic = 0.0;
    double center = 0.5;
};

struct SimInteraction {
    std::string a;
    std::string a_value;
    std::string b;
    std::string b_value; // empty: numeric b
    double weight = 0.0;
};

struct SimCostFactor {
    std::string param;
    double slope = 0.0;
};

struct SimBenchmarkSpec {
    std::string name;
    SearchSpace space;
    std::uint64_t seed = 42;
    int num_questions = 100;

    double bias = 0.0;
    std::map<std::string, std::map<std::string, double>> weights;
    std::vector<SimNumericTerm> numeric;
    std::vector<SimInteraction> interactions;

    std::string tier_param;
    std::map<std::string, double> tier_cost;
    std::map<std::string, double> tier_latency;
    std::map<std::string, std::map<std::string, double>> multipliers;
    std::vector<SimCostFactor> cost_factors;
    double cost_sigma = 0.0;
    double latency_sigma = 0.0;
    std::map<std::string, double> error_rate; // by tier value

    std::vector<std::string> questions() const {
        std::vector<std::string> q;
        char buf[16];
        for (int i = 0; i < num_questions; ++i) {
            std::snprintf(buf, sizeof buf, "q%04d", i);
            q.emplace_back(buf);
        }
        return q;
    }

    void validate() const {
        auto rep = flowsearch::validate(space);
        if (!rep.ok()) throw ConfigError("benchmark '" + name + "' space invalid: " + rep.summary());
        if (num_questions < 1) throw ConfigError("benchmark num_questions must be >= 1");
        if (cost_sigma < 0.0 || latency_sigma < 0.0) throw ConfigError("benchmark noise sigmas must be >= 0");
        const ParamSpec* tier = space.find(tier_param);
        if (!tier || !tier->is_categorical()) throw ConfigError("benchmark tier_param must be a categorical param");
        if (space.is_conditional(tier_param)) throw ConfigError("benchmark tier_param must be unconditional");
        for (const auto& v : tier->values()) {
            auto it = tier_cost.find(v);
            if (it == tier_cost.end() || !(it->second > 0.0)) throw ConfigError("benchmark tier '" + v + "' needs a positive base cost");
        }
        for (const auto& [p, m] : multipliers)
            for (const auto& [v, k] : m)
                if (!(k > 0.0)) throw ConfigError("benchmark cost multiplier " + p + "=" + v + " must be positive");
        for (const auto& f : cost_factors)
            if (!(f.slope > -1.0)) throw ConfigError("benchmark cost factor slope for " + f.param + " must exceed -1");
        for (const auto& [v, e] : error_rate)
            if (!(e >= 0.0 && e < 1.0)) throw ConfigError("benchmark error rate for " + v + " must lie in [0, 1)");
    }
};

namespace detail {

inline double feature(const SearchSpace& space, const FlowConfig& cfg, const std::string& name) {
    return space.param(name).normalize(cfg.at(name));
}

inline std::string tier_of(const SimBenchmarkSpec& s, const FlowConfig& cfg) { return std::get<std::string>(cfg.at(s.tier_param)); }

} // namespace detail

/// Latent pass probability; reads only assigned (active) params.
inline double latent_accuracy(const SimBenchmarkSpec& s, const FlowConfig& cfg) {
    double z = s.bias;
    for (const auto& [param, table] : s.weights) {
        const Value* v = cfg.find(param);
        if (!v) continue;
        auto it = table.find(to_string(*v));
        if (it != table.end()) z += it->second;
    }
    for (const auto& t : s.numeric) {
        if (!cfg.contains(t.param)) continue;
        const double x = detail::feature(s.space, cfg, t.param);
        z += t.linear * x + t.quadratic * (x - t.center) * (x - t.center);
    }
    for (const auto& t : s.interactions) {
        const Value* a = cfg.find(t.a);
        const Value* b = cfg.find(t.b);
        if (!a || !b || to_string(*a) != t.a_value) continue;
        if (t.b_value.empty()) {
            z += t.weight * detail::feature(s.space, cfg, t.b);
        } else if (to_string(*b) == t.b_value) {
            z += t.weight;
        }
    }
    return 1.0 / (1.0 + std::exp(-z));
}

inline double cost_multiplier(const SimBenchmarkSpec& s, const FlowConfig& cfg) {
    double m = 1.0;
    for (const auto& [param, table] : s.multipliers) {
        const Value* v = cfg.find(param);
        if (!v) continue;
        auto it = table.find(to_string(*v));
        if (it != table.end()) m *= it->second;
    }
    for (const auto& f : s.cost_factors)
        if (cfg.contains(f.param)) m *= 1.0 + f.slope * detail::feature(s.space, cfg, f.param);
    return m;
}

inline double expected_cost(const SimBenchmarkSpec& s, const FlowConfig& cfg) {
    return s.tier_cost.at(detail::tier_of(s, cfg)) * cost_multiplier(s, cfg);
}

inline double expected_latency(const SimBenchmarkSpec& s, const FlowConfig& cfg) {
    auto it = s.tier_latency.find(detail::tier_of(s, cfg));
    return (it == s.tier_latency.end() ? 1.0 : it->second) * cost_multiplier(s, cfg);
}

inline double error_probability(const SimBenchmarkSpec& s, const FlowConfig& cfg) {
    auto it = s.error_rate.find(detail::tier_of(s, cfg));
    return it == s.error_rate.end() ? 0.0 : it->second;
}

/// Noise-free objectives: accuracy is the per-question pass probability
/// including errors; cost and latency are the medians of the per-call noise.
inline ObjectiveVector true_objectives(const SimBenchmarkSpec& s, const FlowConfig& cfg) {
    return {(1.0 - error_probability(s, cfg)) * latent_accuracy(s, cfg), expected_cost(s, cfg), expected_latency(s, cfg)};
}

class SimEvaluator final : public Evaluator {
public:
    explicit SimEvaluator(SimBenchmarkSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

    const SimBenchmarkSpec& spec() const { return spec_; }

    EvaluatorCaps caps() const override { return {"sim:" + spec_.name, 1, 0.0}; }

    EvalRecord evaluate(const FlowConfig& config, std::int64_t trial_id, const std::string& question) override {
        auto rep = check_config(spec_.space, config);
        if (!rep.ok()) throw ConfigError("config outside benchmark space: " + rep.summary());
        // One stream per (seed, trial, question); draws in fixed order.
        Rng rng(hash_combine({spec_.seed, static_cast<std::uint64_t>(trial_id), hash_string(question)}));
        const double u_err = rng.uniform();
        const double u_kind = rng.uniform();
        const double u_pass = rng.uniform();
        const double n_cost = rng.normal();
        const double n_lat = rng.normal();
        if (u_err < error_probability(spec_, config))
            return EvalRecord::failure(question, u_kind < 0.5 ? ErrorTag::content_filter : ErrorTag::rate_limit);
        const bool passed = u_pass < latent_accuracy(spec_, config);
        const double cost = expected_cost(spec_, config) * std::exp(spec_.cost_sigma * n_cost);
        const double lat = expected_latency(spec_, config) * std::exp(spec_.latency_sigma * n_lat);
        return EvalRecord::success(question, passed, cost, lat);
    }

private:
    SimBenchmarkSpec spec_;
};

inline SimEvaluator make_sim_evaluator(SimBenchmarkSpec spec) { return SimEvaluator(std::move(spec)); }

/// Every complete config of a finite space (reals on their grid), DFS in
/// topological order. Throws once more than `limit` configs would be produced.
inline std::vector<FlowConfig> enumerate_space(const SearchSpace& space, std::size_t limit = 2'000'000) {
    if (!space.acyclic()) throw ConfigError("space has cyclic activation rules");
    std::vector<FlowConfig> out;
    const auto& order = space.topological_order();
    std::vector<std::vector<Value>> grids;
    for (const auto& p : space.params()) grids.push_back(p.grid_values());
    FlowConfig cur;
    std::function<void(std::size_t)> rec = [&](std::size_t pos) {
        if (pos == order.size()) {
            if (out.size() >= limit) throw ConfigError("space too large to enumerate");
            out.push_back(cur);
            return;
        }
        const auto idx = order[pos];
        const auto& p = space.params()[idx];
        if (!detail::activity_mask(space, cur)[idx]) {
            rec(pos + 1);
            return;
        }
        for (const auto& v : grids[idx]) {
            cur.set(p.name, v);
            rec(pos + 1);
        }
        cur.erase(p.name);
    };
    rec(0);
    return out;
}

struct TrueFrontResult {
    ParetoFront front;              // ids index `configs`
    std::vector<FlowConfig> configs; // full enumeration
    double min_secondary = 0.0;
    double max_secondary = 0.0;
};

inline TrueFrontResult true_front(const SimBenchmarkSpec& s, Secondary sec = Secondary::cost) {
    TrueFrontResult r{ParetoFront(sec), enumerate_space(s.space), 0.0, 0.0};
    std::vector<FrontEntry> pts;
    pts.reserve(r.configs.size());
    r.min_secondary = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < r.configs.size(); ++i) {
        const auto o = true_objectives(s, r.configs[i]);
        const double v = secondary_value(o, sec);
        r.min_secondary = std::min(r.min_secondary, v);
        r.max_secondary = std::max(r.max_secondary, v);
        pts.push_back({static_cast<std::int64_t>(i), o});
    }
    r.front = front_of(pts, sec);
    return r;
}

// ---- JSON ----

inline SimBenchmarkSpec sim_spec_from_json(const json& j, const SearchSpace* builtin_space = nullptr) {
    try {
        SimBenchmarkSpec s;
        s.name = j.value("name", std::string("custom"));
        if (j.at("space").is_object()) {
            s.space = space_from_json(j.at("space"));
        } else if (builtin_space) {
            s.space = *builtin_space;
        } else {
            throw ConfigError("benchmark space must be an inline object");
        }
        s.seed = j.value("seed", std::uint64_t{42});
        s.num_questions = j.value("num_questions", 100);
        s.bias = j.value("bias", 0.0);
        if (j.contains("weights")) s.weights = j.at("weights").get<std::map<std::string, std::map<std::string, double>>>();
        for (const auto& t : j.value("numeric", json::array()))
            s.numeric.push_back({t.at("param").get<std::string>(), t.value("linear", 0.0), t.value("quadratic", 0.0), t.value("center", 0.5)});
        for (const auto& t : j.value("interactions", json::array()))
            s.interactions.push_back({t.at("a").get<std::string>(), t.at("a_value").get<std::string>(), t.at("b").get<std::string>(),
                                      t.value("b_value", std::string{}), t.at("weight").get<double>()});
        const auto& c = j.at("cost");
        s.tier_param = c.at("tier_param").get<std::string>();
        s.tier_cost = c.at("base").get<std::map<std::string, double>>();
        if (c.contains("latency_s")) s.tier_latency = c.at("latency_s").get<std::map<std::string, double>>();
        if (c.contains("multipliers")) s.multipliers = c.at("multipliers").get<std::map<std::string, std::map<std::string, double>>>();
        for (const auto& f : c.value("numeric", json::array())) s.cost_factors.push_back({f.at("param").get<std::string>(), f.at("slope").get<double>()});
        s.cost_sigma = c.value("sigma", 0.0);
        s.latency_sigma = c.value("latency_sigma", 0.0);
        if (j.contains("errors")) s.error_rate = j.at("errors").get<std::map<std::string, double>>();
        s.validate();
        return s;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed benchmark spec: ") + e.what());
    }
}

inline json sim_spec_to_json(const SimBenchmarkSpec& s) {
    json j;
    j["name"] = s.name;
    j["space"] = space_to_json(s.space);
    j["seed"] = s.seed;
    j["num_questions"] = s.num_questions;
    j["bias"] = s.bias;
    j["weights"] = s.weights;
    j["numeric"] = json::array();
    for (const auto& t : s.numeric) j["numeric"].push_back({{"param", t.param}, {"linear", t.linear}, {"quadratic", t.quadratic}, {"center", t.center}});
    j["interactions"] = json::array();
    for (const auto& t : s.interactions) {
        json ji = {{"a", t.a}, {"a_value", t.a_value}, {"b", t.b}, {"weight", t.weight}};
        if (!t.b_value.empty()) ji["b_value"] = t.b_value;
        j["interactions"].push_back(ji);
    }
    json c;
    c["tier_param"] = s.tier_param;
    c["base"] = s.tier_cost;
    c["latency_s"] = s.tier_latency;
    c["multipliers"] = s.multipliers;
    c["numeric"] = json::array();
    for (const auto& f : s.cost_factors) c["numeric"].push_back({{"param", f.param}, {"slope", f.slope}});
    c["sigma"] = s.cost_sigma;
    c["latency_sigma"] = s.latency_sigma;
    j["cost"] = c;
    j["errors"] = s.error_rate;
    return j;
}

/// Reference table of an enumerated front: one row per front member, cost ascending.
inline void write_true_front_csv(std::ostream& os, const TrueFrontResult& r) {
    csv::write_row(os, {"accuracy", "cost_usd", "latency_s", "config"});
    for (const auto& e : r.front.entries()) {
        const auto& o = e.objectives;
        csv::write_row(os, {csv::num(o.accuracy), csv::num(o.cost), csv::num(o.latency.value_or(0.0)),
                            config_to_record(r.configs[static_cast<std::size_t>(e.id)])});
    }
}

} // namespace flowsearch
