#pragma once

// Pareto-Pruner: stop a trial once the optimistic corner of its running
// (cost, accuracy) confidence box is dominated by the current front.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowsearch/eval_record.hpp"
#include "flowsearch/pareto.hpp"

namespace flowsearch {

enum class CostModel { normal, lognormal };

inline const char* to_string(CostModel m) { return m == CostModel::normal ? "normal" : "lognormal"; }

struct PrunerConfig {
    double z = 1.645;
    int min_evals = 10;
    int check_interval = 5;
    CostModel cost_model = CostModel::normal;

    void validate() const {
        if (!(z > 0.0)) throw ConfigError("pruner z must be positive");
        if (min_evals < 1) throw ConfigError("pruner min_evals must be >= 1");
        if (check_interval < 1) throw ConfigError("pruner check_interval must be >= 1");
    }
};

/// 80th percentile with linear interpolation between order statistics.
inline double p80(std::vector<double> xs) {
    if (xs.empty()) return 0.0;
    std::sort(xs.begin(), xs.end());
    const double pos = 0.8 * static_cast<double>(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, xs.size() - 1);
    return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

/// Sample standard deviation (n - 1); zero below two samples.
inline double sample_stddev(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

/// Running statistics of a trial's evaluation stream.
///
/// `costs` holds the secondary objective of successful evaluations: per-call
/// USD, or seconds when a study optimizes latency.
struct PartialEvalStats {
    int N = 0;      // evaluations attempted, errors included
    int L = 0;      // successful evaluations
    int passes = 0;
    std::vector<double> costs;
    double c = 0.0;       // P80 of costs
    double sigma_c = 0.0; // sample std of costs

    double a() const { return N == 0 ? 0.0 : static_cast<double>(passes) / N; }
};

inline PartialEvalStats update(PartialEvalStats stats, const EvalRecord& record, Secondary which = Secondary::cost) {
    const double value = which == Secondary::cost ? record.cost : record.latency;
    if (record.ok() && value < 0.0) throw std::invalid_argument("evaluation record has a negative cost");
    ++stats.N;
    if (record.ok()) {
        ++stats.L;
        if (record.passed) ++stats.passes;
        stats.costs.push_back(value);
        stats.c = p80(stats.costs);
        stats.sigma_c = sample_stddev(stats.costs);
    }
    return stats;
}

struct ConfidenceCorner {
    double c_low = 0.0;
    double a_high = 0.0;
    double c_center = 0.0; // P80, or exp(log-mean) in lognormal mode
};

/// Upper binomial bound a + z sqrt(a(1-a)/N), capped at 1.
inline double accuracy_upper(double a, double n, double z) { return std::min(1.0, a + z * std::sqrt(a * (1.0 - a) / n)); }

/// Lower normal bound c - z sigma / sqrt(L), floored at 0.
inline double cost_lower(double c, double sigma, double l, double z) { return std::max(0.0, c - z * sigma / std::sqrt(l)); }

inline ConfidenceCorner confidence_corner(const PartialEvalStats& stats, const PrunerConfig& cfg) {
    if (stats.L == 0) throw std::invalid_argument("confidence corner needs at least one successful evaluation");
    const double a = stats.a();
    ConfidenceCorner out;
    out.a_high = accuracy_upper(a, stats.N, cfg.z);
    if (cfg.cost_model == CostModel::normal) {
        out.c_center = stats.c;
        out.c_low = cost_lower(stats.c, stats.sigma_c, stats.L, cfg.z);
        return out;
    }
    if (std::any_of(stats.costs.begin(), stats.costs.end(), [](double x) { return !(x > 0.0); })) {
        out.c_center = 0.0;
        out.c_low = 0.0;
        return out;
    }
    std::vector<double> logs;
    logs.reserve(stats.costs.size());
    double mu = 0.0;
    for (double x : stats.costs) {
        logs.push_back(std::log(x));
        mu += logs.back();
    }
    mu /= static_cast<double>(logs.size());
    out.c_center = std::exp(mu);
    out.c_low = std::exp(mu - cfg.z * sample_stddev(logs) / std::sqrt(static_cast<double>(stats.L)));
    return out;
}

enum class Verdict { proceed, prune };

inline const char* to_string(Verdict v) { return v == Verdict::proceed ? "continue" : "prune"; }

/// Whether a pruning check falls on this evaluation count.
inline bool check_due(const PartialEvalStats& stats, const PrunerConfig& cfg) {
    return stats.N >= cfg.min_evals && stats.N % cfg.check_interval == 0;
}

/// Strict dominance of the corner by some front entry.
inline bool corner_dominated(const ParetoFront& front, const ConfidenceCorner& corner) {
    ObjectiveVector p;
    p.accuracy = corner.a_high;
    p.cost = corner.c_low;
    p.latency = corner.c_low;
    return front.dominated(p);
}

inline Verdict should_prune(const PartialEvalStats& stats, const ParetoFront* front, const PrunerConfig& cfg) {
    if (!check_due(stats, cfg) || front == nullptr || front->empty() || stats.L == 0) return Verdict::proceed;
    return corner_dominated(*front, confidence_corner(stats, cfg)) ? Verdict::prune : Verdict::proceed;
}

inline Verdict should_prune(const PartialEvalStats& stats, const FrontSnapshot& front, const PrunerConfig& cfg) {
    return should_prune(stats, front.get(), cfg);
}

} // namespace flowsearch
