#pragma once

// Multi-objective TPE over a conditional space.
//
// History is split into a good and a bad set; per-parameter Parzen densities
// l (good) and g (bad) are fit only on trials where the parameter was active,
// and proposals maximize l/g over candidates drawn ancestrally from l.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <variant>
#include <set>
#include <vector>

#include "flowsearch/errors.hpp"
#include "flowsearch/pareto.hpp"
#include "flowsearch/rng.hpp"
#include "flowsearch/space.hpp"

namespace flowsearch {

struct TpeConfig {
    double gamma = 0.25;
    int n_candidates = 24;
    double prior_weight = 1.0;
    int min_history = 10;
    /// Rank candidates already present in the history below unseen ones.
    /// Sharp good-set densities otherwise keep re-proposing the same few flows.
    bool prefer_novel = true;

    void validate() const {
        if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("tpe gamma must lie in (0, 1)");
        if (n_candidates < 1) throw ConfigError("tpe n_candidates must be >= 1");
        if (!(prior_weight > 0.0)) throw ConfigError("tpe prior_weight must be positive");
        if (min_history < 1) throw ConfigError("tpe min_history must be >= 1");
    }
};

/// One sampler-visible trial. Pruned trials carry partial objectives.
struct Observation {
    FlowConfig config;
    ObjectiveVector objectives;
    bool pruned = false;
};

struct Split {
    std::vector<std::size_t> good; // indices into the observation list, ascending
    std::vector<std::size_t> bad;
};

/// Partitions observations. |good| = ceil(gamma * completed); good members are
/// completed trials taken by nondominated rank, the boundary rank resolved by
/// exact hypervolume subset selection. Pruned trials always land in bad.
inline Split split_observations(const std::vector<Observation>& obs, double gamma, Secondary s = Secondary::cost) {
    if (obs.empty()) throw std::invalid_argument("split_observations: empty trial list");
    std::vector<std::size_t> completed;
    for (std::size_t i = 0; i < obs.size(); ++i)
        if (!obs[i].pruned) completed.push_back(i);
    const auto n_good = static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(completed.size()) - 1e-12));

    std::vector<FrontEntry> pts;
    for (auto i : completed) pts.push_back({static_cast<std::int64_t>(i), obs[i].objectives});
    const auto ranks = nondominated_ranks(pts, s);

    std::vector<char> chosen(obs.size(), 0);
    std::size_t taken = 0;
    for (int r = 1; taken < n_good; ++r) {
        std::vector<std::size_t> tier; // positions in `completed`
        for (std::size_t j = 0; j < ranks.size(); ++j)
            if (ranks[j] == r) tier.push_back(j);
        if (taken + tier.size() <= n_good) {
            for (auto j : tier) chosen[completed[j]] = 1;
            taken += tier.size();
            continue;
        }
        // Reference: componentwise worst over all completed trials, pushed out by 10%.
        double min_acc = std::numeric_limits<double>::infinity(), max_sec = 0.0;
        for (const auto& p : pts) {
            min_acc = std::min(min_acc, p.objectives.accuracy);
            max_sec = std::max(max_sec, secondary_value(p.objectives, s));
        }
        ObjectiveVector ref;
        ref.accuracy = min_acc - 0.1 * std::abs(min_acc);
        ref.cost = ref.latency.emplace(max_sec + 0.1 * std::abs(max_sec));
        std::vector<ObjectiveVector> tier_pts;
        for (auto j : tier) tier_pts.push_back(pts[j].objectives);
        for (auto k : hypervolume_subset(tier_pts, n_good - taken, ref, s)) chosen[completed[tier[k]]] = 1;
        taken = n_good;
    }
    Split out;
    for (std::size_t i = 0; i < obs.size(); ++i) (chosen[i] ? out.good : out.bad).push_back(i);
    return out;
}

namespace detail {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

} // namespace detail

struct CategoricalDensity {
    std::vector<double> probs; // aligned with the parameter's value list
};

/// Truncated-Gaussian Parzen mixture plus a uniform prior on [a, b].
///
/// Coordinates: log(x) for log-scale reals, x otherwise. Integer params use
/// [lo - step/2, hi + step/2] and report the mass of each grid cell.
struct NumericDensity {
    double a = 0.0;
    double b = 1.0;
    std::vector<double> mus;
    double sigma = 1.0;
    double prior_weight = 1.0;

    double kernel_weight() const { return 1.0 / (static_cast<double>(mus.size()) + prior_weight); }
    double prior_mass() const { return prior_weight / (static_cast<double>(mus.size()) + prior_weight); }

    /// Density in the transformed coordinate.
    double pdf(double t) const {
        if (t < a || t > b) return 0.0;
        double d = prior_mass() / (b - a);
        for (double mu : mus) {
            const double z = detail::normal_cdf((b - mu) / sigma) - detail::normal_cdf((a - mu) / sigma);
            d += kernel_weight() * detail::normal_pdf((t - mu) / sigma) / (sigma * z);
        }
        return d;
    }

    /// Probability mass of [t0, t1] intersected with [a, b].
    double mass(double t0, double t1) const {
        t0 = std::max(t0, a);
        t1 = std::min(t1, b);
        if (!(t1 > t0)) return 0.0;
        double m = prior_mass() * (t1 - t0) / (b - a);
        for (double mu : mus) {
            const double z = detail::normal_cdf((b - mu) / sigma) - detail::normal_cdf((a - mu) / sigma);
            m += kernel_weight() * (detail::normal_cdf((t1 - mu) / sigma) - detail::normal_cdf((t0 - mu) / sigma)) / z;
        }
        return m;
    }

    double sample(Rng& rng) const {
        std::vector<double> w(mus.size() + 1, kernel_weight());
        w.back() = prior_mass();
        const auto c = rng.weighted(w);
        if (c == mus.size()) return rng.uniform(a, b);
        for (int tries = 0; tries < 1000; ++tries) {
            const double t = rng.normal(mus[c], sigma);
            if (t >= a && t <= b) return t;
        }
        return std::clamp(mus[c], a, b);
    }
};

struct ParamDensity {
    std::variant<CategoricalDensity, NumericDensity> body;

    /// Probability (categorical, integer) or density (real) of an in-domain value.
    double evaluate(const ParamSpec& p, const Value& v) const {
        if (!p.contains(v)) throw ConfigError("value '" + to_string(v) + "' outside domain of '" + p.name + "'");
        if (auto c = std::get_if<CategoricalDensity>(&body)) {
            const auto& vals = p.values();
            return c->probs[std::find(vals.begin(), vals.end(), std::get<std::string>(v)) - vals.begin()];
        }
        const auto& n = std::get<NumericDensity>(body);
        if (auto i = std::get_if<Integer>(&p.kind)) {
            const double x = static_cast<double>(std::get<std::int64_t>(v)), h = 0.5 * static_cast<double>(i->step);
            return n.mass(x - h, x + h);
        }
        const auto& r = std::get<Real>(p.kind);
        const double x = std::get<double>(v);
        return n.pdf(r.log ? std::log(x) : x);
    }

    Value sample(const ParamSpec& p, Rng& rng) const {
        if (auto c = std::get_if<CategoricalDensity>(&body)) return p.values()[rng.weighted(c->probs)];
        const double t = std::get<NumericDensity>(body).sample(rng);
        if (auto i = std::get_if<Integer>(&p.kind)) {
            auto k = static_cast<std::int64_t>(std::llround((t - static_cast<double>(i->lo)) / static_cast<double>(i->step)));
            k = std::clamp<std::int64_t>(k, 0, (i->hi - i->lo) / i->step);
            return i->lo + k * i->step;
        }
        const auto& r = std::get<Real>(p.kind);
        return std::clamp(r.log ? std::exp(t) : t, r.lo, r.hi);
    }
};

/// Fits one parameter's density from the values it took where it was active.
inline ParamDensity fit_density(const ParamSpec& p, const std::vector<Value>& observations, double prior_weight = 1.0) {
    for (const auto& v : observations)
        if (!p.contains(v)) throw ConfigError("observation '" + to_string(v) + "' outside domain of '" + p.name + "'");
    const double n = static_cast<double>(observations.size());
    if (p.is_categorical()) {
        const auto& vals = p.values();
        CategoricalDensity c;
        c.probs.assign(vals.size(), prior_weight);
        for (const auto& v : observations)
            c.probs[std::find(vals.begin(), vals.end(), std::get<std::string>(v)) - vals.begin()] += 1.0;
        for (auto& x : c.probs) x /= n + prior_weight * static_cast<double>(vals.size());
        return {c};
    }
    NumericDensity d;
    d.prior_weight = prior_weight;
    if (auto i = std::get_if<Integer>(&p.kind)) {
        const double h = 0.5 * static_cast<double>(i->step);
        d.a = static_cast<double>(i->lo) - h;
        d.b = static_cast<double>(i->hi) + h;
        for (const auto& v : observations) d.mus.push_back(static_cast<double>(std::get<std::int64_t>(v)));
    } else {
        const auto& r = std::get<Real>(p.kind);
        d.a = r.log ? std::log(r.lo) : r.lo;
        d.b = r.log ? std::log(r.hi) : r.hi;
        for (const auto& v : observations) d.mus.push_back(r.log ? std::log(std::get<double>(v)) : std::get<double>(v));
    }
    const double range = d.b - d.a;
    const double bw = range / std::max(1.0, std::pow(n, 1.0 / 1.2));
    const double floor_bw = range / std::min(100.0, std::max(1.0, 10.0 * n));
    d.sigma = std::clamp(bw, floor_bw, range);
    return {d};
}

/// Per-parameter densities, declaration order.
struct DensityModel {
    std::vector<ParamDensity> params;
};

inline DensityModel fit_model(const SearchSpace& space, const std::vector<const FlowConfig*>& configs,
                              double prior_weight = 1.0) {
    DensityModel m;
    std::vector<std::vector<char>> masks;
    masks.reserve(configs.size());
    for (const auto* c : configs) masks.push_back(detail::activity_mask(space, *c));
    for (std::size_t i = 0; i < space.params().size(); ++i) {
        const auto& p = space.params()[i];
        std::vector<Value> vals;
        for (std::size_t k = 0; k < configs.size(); ++k) {
            const Value* v = configs[k]->find(p.name);
            if (!v) continue;
            if (!masks[k][i]) throw std::logic_error("fit: parameter '" + p.name + "' observed while inactive");
            vals.push_back(*v);
        }
        m.params.push_back(fit_density(p, vals, prior_weight));
    }
    return m;
}

inline double log_acquisition(const SearchSpace& space, const FlowConfig& cfg, const DensityModel& l,
                              const DensityModel& g) {
    double s = 0.0;
    for (const auto& [name, v] : cfg.assignments()) {
        const auto i = space.index_of(space.param(name).name);
        const auto& p = space.params()[i];
        s += std::log(l.params[i].evaluate(p, v)) - std::log(g.params[i].evaluate(p, v));
    }
    return s;
}

/// Product of l/g over the config's active (assigned) parameters.
inline double acquisition(const SearchSpace& space, const FlowConfig& cfg, const DensityModel& l,
                          const DensityModel& g) {
    return std::exp(log_acquisition(space, cfg, l, g));
}

inline FlowConfig sample_from(const SearchSpace& space, const DensityModel& m, Rng& rng) {
    return sample_with(space, [&](const ParamSpec& p, std::size_t i, const FlowConfig&) { return m.params[i].sample(p, rng); });
}

inline FlowConfig propose(const std::vector<Observation>& history, const SearchSpace& space, const TpeConfig& cfg, Rng& rng,
                          Secondary s = Secondary::cost) {
    const auto completed = std::count_if(history.begin(), history.end(), [](const Observation& o) { return !o.pruned; });
    if (completed < cfg.min_history) return sample_random(space, rng);

    const auto split = split_observations(history, cfg.gamma, s);
    std::vector<const FlowConfig*> good, bad;
    for (auto i : split.good) good.push_back(&history[i].config);
    for (auto i : split.bad) bad.push_back(&history[i].config);
    const auto l = fit_model(space, good, cfg.prior_weight);
    const auto g = fit_model(space, bad, cfg.prior_weight);

    std::set<FlowConfig> seen;
    if (cfg.prefer_novel)
        for (const auto& o : history) seen.insert(o.config);
    FlowConfig best;
    double best_score = -std::numeric_limits<double>::infinity();
    bool best_novel = false;
    for (int k = 0; k < cfg.n_candidates; ++k) {
        auto cand = sample_from(space, l, rng);
        const double score = log_acquisition(space, cand, l, g);
        const bool novel = cfg.prefer_novel && !seen.count(cand);
        if (k == 0 || (novel && !best_novel) || (novel == best_novel && score > best_score)) {
            best_novel = novel;
            best_score = score;
            best = std::move(cand);
        }
    }
    return best;
}

} // namespace flowsearch
