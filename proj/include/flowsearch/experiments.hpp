#pragma once

// Repeated-study experiments on simulated benchmarks: pruner ablation and
// seeding comparison. Fronts are scored on the benchmark's closed-form
// objectives so that arms with different noise draws compare fairly.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flowsearch/study.hpp"

namespace flowsearch {

/// Scores a set of configs by the pareto_area of their true-objective front,
/// relative to the enumerated true front. Bounds span every config's
/// expected secondary objective.
class AreaOracle {
public:
    explicit AreaOracle(const SimBenchmarkSpec& spec, Secondary s = Secondary::cost) : spec_(spec), secondary_(s) {
        const auto tf = true_front(spec, s);
        lo_ = tf.min_secondary;
        hi_ = tf.max_secondary;
        true_area_ = pareto_area(tf.front, lo_, hi_);
    }

    double lo() const { return lo_; }
    double hi() const { return hi_; }
    double true_area() const { return true_area_; }

    double area(const std::vector<FlowConfig>& configs) const {
        std::vector<FrontEntry> pts;
        for (std::size_t i = 0; i < configs.size(); ++i)
            pts.push_back({static_cast<std::int64_t>(i), true_objectives(spec_, configs[i])});
        return pareto_area(front_of(pts, secondary_), lo_, hi_);
    }
    double ratio(const std::vector<FlowConfig>& configs) const { return area(configs) / true_area_; }

private:
    SimBenchmarkSpec spec_;
    Secondary secondary_;
    double lo_ = 0.0, hi_ = 0.0, true_area_ = 0.0;
};

/// Per-trial-count curves, indexed by trial id order (entry t covers ids 0..t).
struct ArmCurve {
    std::vector<std::size_t> evaluations; // cumulative
    std::vector<double> spend_usd;        // cumulative evaluation cost
    std::vector<double> area;             // true-front area ratio of completed trials so far

    std::size_t final_evaluations() const { return evaluations.empty() ? 0 : evaluations.back(); }
    double final_area() const { return area.empty() ? 0.0 : area.back(); }
    /// Trials needed to reach `threshold`; empty if never reached.
    std::optional<int> trials_to(double threshold) const {
        for (std::size_t i = 0; i < area.size(); ++i)
            if (area[i] >= threshold) return static_cast<int>(i + 1);
        return std::nullopt;
    }
};

inline ArmCurve curve_of(const Study& st, const AreaOracle& oracle) {
    ArmCurve c;
    std::vector<FlowConfig> done;
    std::size_t evals = 0;
    double spend = 0.0;
    for (const auto& t : st.trials) {
        evals += t.records.size();
        for (const auto& r : t.records) spend += r.cost;
        if (t.status == TrialStatus::completed) done.push_back(t.config);
        c.evaluations.push_back(evals);
        c.spend_usd.push_back(spend);
        c.area.push_back(oracle.ratio(done));
    }
    return c;
}

inline double median(std::vector<double> xs) {
    if (xs.empty()) return 0.0;
    std::sort(xs.begin(), xs.end());
    const auto n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

/// The study seed becomes `rep`; the simulator's noise seed is derived from
/// the benchmark seed and `rep`, so paired arms share one noise stream.
inline StudyConfig with_rep(StudyConfig c, std::uint64_t rep) {
    if (!c.simulated()) throw ConfigError("repeated experiments need the simulated evaluator");
    auto& b = std::get<SimulatedBinding>(c.evaluator);
    b.spec.seed = hash_combine({b.spec.seed, rep});
    c.seed = rep;
    c.storage.clear();
    return c;
}

struct AblationRep {
    std::uint64_t seed = 0;
    ArmCurve on, off;
};

struct AblationReport {
    std::vector<AblationRep> reps;
    double true_area = 0.0;
    /// Median over reps of 1 - evals(on)/evals(off), and of area(on)/area(off).
    double median_eval_savings = 0.0;
    double median_area_ratio = 0.0;
};

inline AblationReport ablate_pruner(const StudyConfig& cfg, const std::vector<std::uint64_t>& rep_seeds) {
    if (!cfg.simulated()) throw ConfigError("ablate-pruner needs the simulated evaluator");
    const AreaOracle oracle(cfg.sim_spec(), cfg.secondary);
    AblationReport out;
    out.true_area = oracle.true_area();
    std::vector<double> savings, ratios;
    for (auto rep : rep_seeds) {
        auto on = with_rep(cfg, rep);
        if (!on.pruner) on.pruner = PrunerConfig{};
        auto off = on;
        off.pruner.reset();
        AblationRep r{rep, curve_of(run_study(on), oracle), curve_of(run_study(off), oracle)};
        savings.push_back(1.0 - static_cast<double>(r.on.final_evaluations()) / static_cast<double>(r.off.final_evaluations()));
        ratios.push_back(r.off.final_area() > 0.0 ? r.on.final_area() / r.off.final_area() : 0.0);
        out.reps.push_back(std::move(r));
    }
    out.median_eval_savings = median(savings);
    out.median_area_ratio = median(ratios);
    return out;
}

enum class SeedingArm { random, static_, transfer };

inline const char* to_string(SeedingArm a) {
    switch (a) {
    case SeedingArm::random: return "random";
    case SeedingArm::static_: return "static";
    case SeedingArm::transfer: return "transfer";
    }
    return "?";
}

struct SeedingComparisonOptions {
    std::vector<std::string> priors; // logs of earlier studies, for the transfer arm
    std::size_t n_seeds = 10;        // random and transfer arms
    int k_fronts = 2;
    double threshold = 0.8; // area ratio for the trials-to-threshold summary
};

struct SeedingComparison {
    struct Run {
        SeedingArm arm;
        std::uint64_t seed;
        ArmCurve curve;
    };
    std::vector<Run> runs;
    double true_area = 0.0;
    double threshold = 0.8;

    /// Median trials to threshold; arms that never reach it count as budget + 1.
    double median_trials_to_threshold(SeedingArm arm) const {
        std::vector<double> xs;
        for (const auto& r : runs)
            if (r.arm == arm) xs.push_back(r.curve.trials_to(threshold).value_or(static_cast<int>(r.curve.area.size()) + 1));
        return median(xs);
    }
};

inline StudyConfig seeding_arm(StudyConfig c, SeedingArm arm, const SeedingComparisonOptions& o) {
    c.seeding = SeedingConfig{};
    c.seeding.use_static = arm == SeedingArm::static_;
    c.seeding.random = arm == SeedingArm::random ? static_cast<int>(o.n_seeds) : 0;
    if (arm == SeedingArm::transfer) c.seeding.transfer = TransferSeeding{o.priors, o.k_fronts, static_cast<int>(o.n_seeds)};
    return c;
}

inline SeedingComparison compare_seeding(const StudyConfig& cfg, const std::vector<std::uint64_t>& rep_seeds,
                                         const SeedingComparisonOptions& o,
                                         std::vector<SeedingArm> arms = {SeedingArm::random, SeedingArm::static_,
                                                                         SeedingArm::transfer}) {
    if (!cfg.simulated()) throw ConfigError("seeding comparison needs the simulated evaluator");
    if (std::count(arms.begin(), arms.end(), SeedingArm::transfer) && o.priors.empty())
        throw ConfigError("transfer arm needs at least one prior study log");
    const AreaOracle oracle(cfg.sim_spec(), cfg.secondary);
    SeedingComparison out;
    out.true_area = oracle.true_area();
    out.threshold = o.threshold;
    for (auto arm : arms)
        for (auto rep : rep_seeds) out.runs.push_back({arm, rep, curve_of(run_study(seeding_arm(with_rep(cfg, rep), arm, o)), oracle)});
    return out;
}

} // namespace flowsearch
