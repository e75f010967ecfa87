#pragma once

// Initial trial sets: static standard flows, random draws, and transfer seeds
// picked diversely from earlier studies' Pareto sets.

#include <algorithm>
#include <cmath>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowsearch/pareto.hpp"
#include "flowsearch/rng.hpp"
#include "flowsearch/space.hpp"
#include "flowsearch/space_io.hpp"

namespace flowsearch {

enum class Origin { static_seed, random_seed, transfer_seed, sampler };

inline const char* to_string(Origin o) {
    switch (o) {
    case Origin::static_seed: return "static-seed";
    case Origin::random_seed: return "random-seed";
    case Origin::transfer_seed: return "transfer-seed";
    case Origin::sampler: return "sampler";
    }
    return "sampler";
}

inline Origin parse_origin(const std::string& s) {
    if (s == "static-seed") return Origin::static_seed;
    if (s == "random-seed") return Origin::random_seed;
    if (s == "transfer-seed") return Origin::transfer_seed;
    if (s == "sampler") return Origin::sampler;
    throw ConfigError("unknown trial origin '" + s + "'");
}

struct SeedEntry {
    FlowConfig config;
    Origin origin = Origin::static_seed;
    std::string label;
    bool baseline = false;
};

/// Seeds in evaluation order.
struct SeedPlan {
    std::vector<SeedEntry> entries;

    std::size_t size() const { return entries.size(); }
    std::size_t count(Origin o) const {
        return static_cast<std::size_t>(
            std::count_if(entries.begin(), entries.end(), [&](const SeedEntry& e) { return e.origin == o; }));
    }
};

struct SeedTemplate {
    std::string label;
    std::map<std::string, Value> assignments;
    bool baseline = false;
};

/// The standard-flow list, derived from the space's own LLM, splitter,
/// embedding, and flow values. Rows may reference params the space lacks;
/// static_seeds skips those.
inline std::vector<SeedTemplate> static_templates(const SearchSpace& space) {
    auto values_of = [&](const std::string& name) {
        const ParamSpec* p = space.find(name);
        return p && p->is_categorical() ? p->values() : std::vector<std::string>{};
    };
    auto fallback_of = [&](const std::string& name) {
        const ParamSpec* p = space.find(name);
        return p ? to_string(p->fallback_value()) : std::string{};
    };
    const auto base_llm = fallback_of("llm");
    const auto base_splitter = fallback_of("splitter");
    const auto base_embedding = fallback_of("embedding");
    const std::string rag = "rag";

    std::vector<SeedTemplate> rows;
    for (const auto& llm : values_of("llm")) {
        for (const auto& sp : values_of("splitter")) {
            rows.push_back({"dense/" + llm + "/" + sp,
                            {{"flow", rag}, {"llm", llm}, {"retriever", "dense"}, {"splitter", sp}, {"embedding", base_embedding},
                             {"prompt", "default"}},
                            llm == base_llm && sp == base_splitter});
        }
        rows.push_back({"sparse/" + llm, {{"flow", rag}, {"llm", llm}, {"retriever", "sparse"}, {"prompt", "default"}}});
        rows.push_back({"dense-few-shot/" + llm,
                        {{"flow", rag}, {"llm", llm}, {"retriever", "dense"}, {"few_shot_enabled", "true"}, {"prompt", "default"}}});
        rows.push_back({"fusion/" + llm, {{"flow", rag}, {"llm", llm}, {"retriever", "fusion"}, {"prompt", "default"}}});
        rows.push_back({"dense-concise/" + llm, {{"flow", rag}, {"llm", llm}, {"retriever", "dense"}, {"prompt", "concise"}}});
    }
    for (const auto& emb : values_of("embedding")) {
        if (emb == base_embedding) continue;
        rows.push_back({"dense-embedding/" + emb,
                        {{"flow", rag}, {"llm", base_llm}, {"retriever", "dense"}, {"embedding", emb}, {"prompt", "default"}}});
    }
    for (const auto& flow : values_of(space.root())) {
        if (flow == rag) continue;
        for (const auto* prompt : {"default", "concise"})
            rows.push_back({"agent/" + flow + "/" + prompt, {{space.root(), flow}, {"prompt", std::string(prompt)}}});
    }
    return rows;
}

struct StaticSeeds {
    std::vector<SeedEntry> seeds;
    std::vector<std::string> warnings; // one per skipped row
};

inline StaticSeeds static_seeds(const SearchSpace& space) {
    StaticSeeds out;
    std::set<FlowConfig> seen;
    for (const auto& t : static_templates(space)) {
        std::string problem;
        FlowConfig partial;
        for (const auto& [name, v] : t.assignments) {
            const ParamSpec* p = space.find(name);
            if (!p) {
                problem = "parameter '" + name + "' not in space";
                break;
            }
            if (!p->contains(v)) {
                problem = "value '" + to_string(v) + "' not in domain of '" + name + "'";
                break;
            }
            partial.set(name, v);
        }
        if (problem.empty()) {
            auto c = complete_config(space, partial);
            // A named assignment that ends up inactive means the row does not fit this space.
            for (const auto& [name, _] : partial.assignments())
                if (!c.contains(name)) problem = "parameter '" + name + "' inactive in this row";
            if (problem.empty() && !seen.insert(c).second) problem = "duplicates an earlier row";
            if (problem.empty()) {
                out.seeds.push_back({std::move(c), Origin::static_seed, t.label, t.baseline});
                continue;
            }
        }
        out.warnings.push_back("static seed '" + t.label + "' skipped: " + problem);
    }
    return out;
}

inline std::vector<FlowConfig> random_seeds(const SearchSpace& space, std::size_t n, Rng& rng) {
    std::vector<FlowConfig> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(sample_random(space, rng));
    return out;
}

// ---- transfer seeding ----

struct PriorTrial {
    FlowConfig config;
    ObjectiveVector objectives;
};

/// Completed trials of one earlier study, in trial order.
using PriorStudy = std::vector<PriorTrial>;

struct PoolMember {
    FlowConfig config;
    ObjectiveVector objectives;
    int depth = 0;       // front number within its study, 1 = actual front
    std::size_t study = 0;
    int cluster = -1;
    bool selected = false;
};

struct TransferResult {
    std::vector<FlowConfig> seeds;
    std::vector<PoolMember> pool;
    std::vector<std::string> warnings;
};

namespace detail {

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
    return d;
}

/// Lloyd iterations from a k-means++ start; returns a cluster label per point.
inline std::vector<int> kmeans(const std::vector<std::vector<double>>& x, std::size_t k, Rng& rng, int max_iter = 100) {
    const std::size_t n = x.size();
    std::vector<std::vector<double>> centers;
    centers.push_back(x[rng.below(n)]);
    std::vector<double> d2(n);
    while (centers.size() < k) {
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::numeric_limits<double>::infinity();
            for (const auto& c : centers) d2[i] = std::min(d2[i], sq_dist(x[i], c));
        }
        double total = 0.0;
        for (double v : d2) total += v;
        centers.push_back(total > 0.0 ? x[rng.weighted(d2)] : x[rng.below(n)]);
    }
    std::vector<int> label(n, -1);
    for (int it = 0; it < max_iter; ++it) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double bd = sq_dist(x[i], centers[0]);
            for (std::size_t c = 1; c < k; ++c) {
                const double d = sq_dist(x[i], centers[c]);
                if (d < bd) {
                    bd = d;
                    best = static_cast<int>(c);
                }
            }
            if (label[i] != best) {
                label[i] = best;
                changed = true;
            }
        }
        if (!changed && it > 0) break;
        std::vector<std::vector<double>> sum(k, std::vector<double>(x[0].size(), 0.0));
        std::vector<std::size_t> cnt(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++cnt[static_cast<std::size_t>(label[i])];
            for (std::size_t j = 0; j < x[i].size(); ++j) sum[static_cast<std::size_t>(label[i])][j] += x[i][j];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (cnt[c] == 0) {
                // Re-seed an empty cluster at the point farthest from its center.
                std::size_t far = 0;
                double fd = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double d = sq_dist(x[i], centers[static_cast<std::size_t>(label[i])]);
                    if (d > fd) {
                        fd = d;
                        far = i;
                    }
                }
                centers[c] = x[far];
                label[far] = static_cast<int>(c);
                changed = true;
                continue;
            }
            for (auto& v : sum[c]) v /= static_cast<double>(cnt[c]);
            centers[c] = std::move(sum[c]);
        }
    }
    return label;
}

} // namespace detail

inline TransferResult transfer_seeds(const std::vector<PriorStudy>& prior, const SearchSpace& space, int k_fronts,
                                     std::size_t n_select, Rng& rng, Secondary s = Secondary::cost) {
    TransferResult out;
    for (std::size_t si = 0; si < prior.size(); ++si) {
        std::vector<FrontEntry> pts;
        for (std::size_t i = 0; i < prior[si].size(); ++i) pts.push_back({static_cast<std::int64_t>(i), prior[si][i].objectives});
        const auto ranks = nondominated_ranks(pts, s);
        for (std::size_t i = 0; i < prior[si].size(); ++i) {
            if (ranks[i] > k_fronts) continue;
            const auto& t = prior[si][i];
            bool known = true;
            for (const auto& [name, _] : t.config.assignments()) known = known && space.find(name) != nullptr;
            if (!known || !check_config(space, t.config).ok()) {
                out.warnings.push_back("transfer: dropped incompatible config " + config_to_record(t.config));
                continue;
            }
            out.pool.push_back({t.config, t.objectives, ranks[i], si, -1, false});
        }
    }
    if (out.pool.empty()) throw std::invalid_argument("transfer_seeds: empty pool");
    if (n_select == 0) return out;

    std::vector<std::vector<double>> x;
    for (const auto& m : out.pool) x.push_back(encode(space, m.config));
    const std::size_t distinct = std::set<std::vector<double>>(x.begin(), x.end()).size();
    const std::size_t k = std::min(n_select, distinct);
    const auto labels = detail::kmeans(x, k, rng);
    for (std::size_t i = 0; i < out.pool.size(); ++i) out.pool[i].cluster = labels[i];

    auto better = [&](std::size_t a, std::size_t b) {
        const auto &pa = out.pool[a], &pb = out.pool[b];
        if (pa.depth != pb.depth) return pa.depth < pb.depth;
        if (pa.objectives.accuracy != pb.objectives.accuracy) return pa.objectives.accuracy > pb.objectives.accuracy;
        const double ca = secondary_value(pa.objectives, s), cb = secondary_value(pb.objectives, s);
        if (ca != cb) return ca < cb;
        return a < b;
    };
    std::vector<std::optional<std::size_t>> pick(k);
    for (std::size_t i = 0; i < out.pool.size(); ++i) {
        auto& p = pick[static_cast<std::size_t>(labels[i])];
        if (!p || better(i, *p)) p = i;
    }
    std::vector<std::size_t> chosen;
    for (const auto& p : pick)
        if (p) chosen.push_back(*p);
    std::sort(chosen.begin(), chosen.end(), better);
    for (auto i : chosen) {
        out.pool[i].selected = true;
        out.seeds.push_back(out.pool[i].config);
    }
    return out;
}

// ---- seed files: one flat config record per line ----

inline void write_seed_file(std::ostream& os, const std::vector<FlowConfig>& seeds) {
    for (const auto& c : seeds) os << config_to_record(c) << '\n';
}

inline std::vector<FlowConfig> read_seed_file(std::istream& is, const SearchSpace& space) {
    std::vector<FlowConfig> out;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ConfigError("seed file line " + std::to_string(lineno) + ": " + e.what());
        }
        auto c = config_from_json(space, j);
        auto rep = check_config(space, c);
        if (!rep.ok()) throw ConfigError("seed file line " + std::to_string(lineno) + ": " + rep.summary());
        out.push_back(std::move(c));
    }
    return out;
}

} // namespace flowsearch
