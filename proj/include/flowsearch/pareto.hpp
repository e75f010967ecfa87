#pragma once

// Dominance, Pareto fronts, and 2-D front metrics over (accuracy up, cost down).
//
// The second objective is cost by default; studies optimizing latency select
// Secondary::latency and every routine reads that slot instead.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowsearch/errors.hpp"

namespace flowsearch {

enum class Secondary { cost, latency };

inline const char* to_string(Secondary s) { return s == Secondary::cost ? "cost" : "latency"; }

struct ObjectiveVector {
    double accuracy = 0.0;
    double cost = 0.0;
    std::optional<double> latency;

    friend bool operator==(const ObjectiveVector&, const ObjectiveVector&) = default;
};

inline double secondary_value(const ObjectiveVector& v, Secondary s) {
    if (s == Secondary::cost) return v.cost;
    if (!v.latency) throw std::invalid_argument("objective vector has no latency");
    return *v.latency;
}

/// a is at least as good in both objectives and strictly better in one.
inline bool dominates(const ObjectiveVector& a, const ObjectiveVector& b, Secondary s = Secondary::cost) {
    const double sa = secondary_value(a, s), sb = secondary_value(b, s);
    return a.accuracy >= b.accuracy && sa <= sb && (a.accuracy > b.accuracy || sa < sb);
}

struct FrontEntry {
    std::int64_t id = 0;
    ObjectiveVector objectives;

    friend bool operator==(const FrontEntry&, const FrontEntry&) = default;
};

/// Nondominated set kept sorted by the secondary objective (ascending).
class ParetoFront {
public:
    explicit ParetoFront(Secondary s = Secondary::cost) : secondary_(s) {}

    Secondary secondary() const { return secondary_; }
    const std::vector<FrontEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    bool contains(std::int64_t id) const {
        return std::any_of(entries_.begin(), entries_.end(), [&](const FrontEntry& e) { return e.id == id; });
    }

    /// True iff some entry dominates v.
    bool dominated(const ObjectiveVector& v) const {
        return std::any_of(entries_.begin(), entries_.end(),
                           [&](const FrontEntry& e) { return dominates(e.objectives, v, secondary_); });
    }

    /// Inserts unless dominated or duplicated; evicts entries the newcomer dominates.
    /// Equal objective vectors keep the smaller trial id. Returns whether the front changed.
    bool insert(const FrontEntry& e) {
        const double se = secondary_value(e.objectives, secondary_);
        for (auto& cur : entries_) {
            if (dominates(cur.objectives, e.objectives, secondary_)) return false;
            if (cur.objectives.accuracy == e.objectives.accuracy && secondary_value(cur.objectives, secondary_) == se) {
                if (e.id < cur.id) {
                    cur = e;
                    return true;
                }
                return false;
            }
        }
        std::erase_if(entries_, [&](const FrontEntry& cur) { return dominates(e.objectives, cur.objectives, secondary_); });
        auto pos = std::lower_bound(entries_.begin(), entries_.end(), se, [&](const FrontEntry& cur, double v) {
            return secondary_value(cur.objectives, secondary_) < v;
        });
        entries_.insert(pos, e);
        return true;
    }

private:
    Secondary secondary_;
    std::vector<FrontEntry> entries_;
};

using FrontSnapshot = std::shared_ptr<const ParetoFront>;

/// Indices (into `points`) of the nondominated subset, in input order.
/// Duplicate vectors keep their first occurrence.
inline std::vector<std::size_t> nondominated_indices(const std::vector<FrontEntry>& points,
                                                     Secondary s = Secondary::cost) {
    std::vector<std::size_t> idx(points.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const double sa = secondary_value(points[a].objectives, s), sb = secondary_value(points[b].objectives, s);
        if (sa != sb) return sa < sb;
        return points[a].objectives.accuracy > points[b].objectives.accuracy;
    });
    std::vector<std::size_t> keep;
    double best = -std::numeric_limits<double>::infinity();
    for (auto i : idx) {
        if (points[i].objectives.accuracy > best) {
            keep.push_back(i);
            best = points[i].objectives.accuracy;
        }
    }
    std::sort(keep.begin(), keep.end());
    return keep;
}

inline ParetoFront front_of(const std::vector<FrontEntry>& points, Secondary s = Secondary::cost) {
    ParetoFront front(s);
    for (auto i : nondominated_indices(points, s)) front.insert(points[i]);
    return front;
}

/// Convenience overload; entry ids are the input positions.
inline ParetoFront front_of(const std::vector<ObjectiveVector>& points, Secondary s = Secondary::cost) {
    std::vector<FrontEntry> entries;
    entries.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) entries.push_back({static_cast<std::int64_t>(i), points[i]});
    return front_of(entries, s);
}

/// Nondominated rank per point (1 = first front), by repeated peeling.
inline std::vector<int> nondominated_ranks(const std::vector<FrontEntry>& points, Secondary s = Secondary::cost) {
    std::vector<int> rank(points.size(), 0);
    std::vector<std::size_t> remaining(points.size());
    std::iota(remaining.begin(), remaining.end(), std::size_t{0});
    int r = 0;
    while (!remaining.empty()) {
        ++r;
        std::vector<FrontEntry> sub;
        sub.reserve(remaining.size());
        for (auto i : remaining) sub.push_back(points[i]);
        // Exact duplicates of a front member share its rank.
        auto nd = nondominated_indices(sub, s);
        std::vector<char> on(remaining.size(), 0);
        for (auto j : nd) on[j] = 1;
        for (std::size_t j = 0; j < remaining.size(); ++j) {
            if (on[j]) continue;
            for (auto k : nd) {
                if (sub[k].objectives == sub[j].objectives) {
                    on[j] = 1;
                    break;
                }
            }
        }
        std::vector<std::size_t> next;
        for (std::size_t j = 0; j < remaining.size(); ++j) {
            if (on[j]) {
                rank[remaining[j]] = r;
            } else {
                next.push_back(remaining[j]);
            }
        }
        remaining = std::move(next);
    }
    return rank;
}

namespace detail {

struct Point2 {
    double acc;
    double sec;
};

/// Area dominated by points w.r.t. (ref_sec, ref_acc); no validation.
inline double hypervolume_2d(std::vector<Point2> pts, double ref_sec, double ref_acc) {
    std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) {
        return a.sec != b.sec ? a.sec < b.sec : a.acc > b.acc;
    });
    double area = 0.0, best = ref_acc;
    for (const auto& p : pts) {
        if (p.sec >= ref_sec || p.acc <= best) continue;
        area += (ref_sec - p.sec) * (p.acc - best);
        best = p.acc;
    }
    return area;
}

} // namespace detail

/// Dominated area between the front and the reference point (sorted sweep).
inline double hypervolume(const ParetoFront& front, const ObjectiveVector& reference) {
    if (!(reference.accuracy >= 0.0)) throw std::invalid_argument("hypervolume reference accuracy must be >= 0");
    const double ref_sec = secondary_value(reference, front.secondary());
    std::vector<detail::Point2> pts;
    for (const auto& e : front.entries())
        pts.push_back({e.objectives.accuracy, secondary_value(e.objectives, front.secondary())});
    return detail::hypervolume_2d(std::move(pts), ref_sec, reference.accuracy);
}

/// Normalized hypervolume in (log10 secondary, accuracy) over [lo, hi]; a front
/// reaching accuracy 1 at `lo` scores 1.
inline double pareto_area(const ParetoFront& front, double lo, double hi) {
    if (!(lo > 0.0) || !(hi > lo)) throw std::invalid_argument("pareto_area bounds must satisfy 0 < lo < hi");
    const double llo = std::log10(lo), lhi = std::log10(hi);
    std::vector<detail::Point2> pts;
    for (const auto& e : front.entries()) {
        const double s = secondary_value(e.objectives, front.secondary());
        if (!(s < hi)) continue;
        const double ls = s <= lo ? llo : std::log10(s);
        pts.push_back({std::clamp(e.objectives.accuracy, 0.0, 1.0), ls});
    }
    return detail::hypervolume_2d(std::move(pts), lhi, 0.0) / (lhi - llo);
}

struct BaselineGains {
    double accuracy_delta = 0.0;
    /// Set when no entry is as cheap as the baseline; the delta is then taken
    /// against the cheapest entry.
    bool iso_cost_extrapolated = false;
    /// Empty when no entry reaches the baseline accuracy.
    std::optional<double> cost_reduction;
};

/// Step-function (staircase) comparisons against a baseline point.
inline BaselineGains baseline_gains(const ParetoFront& front, const ObjectiveVector& baseline) {
    const auto s = front.secondary();
    const double bs = secondary_value(baseline, s);
    if (!(bs > 0.0)) throw std::invalid_argument("baseline cost must be positive");
    BaselineGains g;
    if (front.empty()) return g;

    std::optional<double> best_acc;
    for (const auto& e : front.entries())
        if (secondary_value(e.objectives, s) <= bs) best_acc = std::max(best_acc.value_or(-1.0), e.objectives.accuracy);
    if (!best_acc) {
        g.iso_cost_extrapolated = true;
        best_acc = front.entries().front().objectives.accuracy;
    }
    g.accuracy_delta = *best_acc - baseline.accuracy;

    std::optional<double> min_cost;
    for (const auto& e : front.entries())
        if (e.objectives.accuracy >= baseline.accuracy)
            min_cost = std::min(min_cost.value_or(std::numeric_limits<double>::infinity()), secondary_value(e.objectives, s));
    if (min_cost) g.cost_reduction = 1.0 - *min_cost / bs;
    return g;
}

struct ShiftRow {
    std::int64_t id = 0;
    double accuracy_delta_pp = 0.0;
    double cost_multiplier = 1.0;
};

struct FrontShift {
    std::vector<ShiftRow> rows;
    double mean_accuracy_delta_pp = 0.0;
    double mean_cost_multiplier = 1.0;
};

/// Per-entry change from `before` to `after`, matched by id.
inline FrontShift front_shift(const std::vector<FrontEntry>& before, const std::vector<FrontEntry>& after,
                              Secondary s = Secondary::cost) {
    FrontShift out;
    for (const auto& b : before) {
        auto it = std::find_if(after.begin(), after.end(), [&](const FrontEntry& a) { return a.id == b.id; });
        if (it == after.end()) throw std::invalid_argument("front_shift: no 'after' entry for id " + std::to_string(b.id));
        const double sb = secondary_value(b.objectives, s);
        if (!(sb > 0.0)) throw std::invalid_argument("front_shift: non-positive cost for id " + std::to_string(b.id));
        out.rows.push_back({b.id, (it->objectives.accuracy - b.objectives.accuracy) * 100.0,
                            secondary_value(it->objectives, s) / sb});
    }
    for (const auto& a : after) {
        if (std::none_of(before.begin(), before.end(), [&](const FrontEntry& b) { return b.id == a.id; }))
            throw std::invalid_argument("front_shift: unmatched 'after' id " + std::to_string(a.id));
    }
    if (!out.rows.empty()) {
        double d = 0.0, m = 0.0;
        for (const auto& r : out.rows) {
            d += r.accuracy_delta_pp;
            m += r.cost_multiplier;
        }
        out.mean_accuracy_delta_pp = d / static_cast<double>(out.rows.size());
        out.mean_cost_multiplier = m / static_cast<double>(out.rows.size());
    }
    return out;
}

inline FrontShift front_shift(const ParetoFront& before, const std::vector<FrontEntry>& after) {
    return front_shift(before.entries(), after, before.secondary());
}

/// Exact hypervolume subset selection on a mutually nondominated set.
///
/// Picks k points maximizing the dominated area w.r.t. (ref_sec, ref_acc). On a
/// 2-D front sorted by secondary objective, the area of a chosen chain is
/// sum_j (acc_j - acc_{j-1}) * (ref_sec - sec_j), which admits an O(k n^2)
/// dynamic program over the last chosen point. Returns indices into `pts`,
/// ascending. Ties resolve toward lower indices.
inline std::vector<std::size_t> hypervolume_subset(const std::vector<ObjectiveVector>& pts, std::size_t k,
                                                   const ObjectiveVector& reference, Secondary s = Secondary::cost) {
    const std::size_t n = pts.size();
    if (k >= n) {
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), std::size_t{0});
        return all;
    }
    if (k == 0) return {};
    const double ref_sec = secondary_value(reference, s), ref_acc = reference.accuracy;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double sa = secondary_value(pts[a], s), sb = secondary_value(pts[b], s);
        return sa != sb ? sa < sb : pts[a].accuracy < pts[b].accuracy;
    });
    auto sec = [&](std::size_t j) { return std::min(secondary_value(pts[order[j]], s), ref_sec); };
    auto acc = [&](std::size_t j) { return std::max(pts[order[j]].accuracy, ref_acc); };

    constexpr double kNeg = -std::numeric_limits<double>::infinity();
    // best[t][j]: max area with t+1 points chosen, the last (highest secondary) being j.
    std::vector<std::vector<double>> best(k, std::vector<double>(n, kNeg));
    std::vector<std::vector<std::size_t>> from(k, std::vector<std::size_t>(n, n));
    for (std::size_t j = 0; j < n; ++j) best[0][j] = (acc(j) - ref_acc) * (ref_sec - sec(j));
    for (std::size_t t = 1; t < k; ++t) {
        for (std::size_t j = t; j < n; ++j) {
            for (std::size_t i = t - 1; i < j; ++i) {
                if (best[t - 1][i] == kNeg) continue;
                const double v = best[t - 1][i] + std::max(0.0, acc(j) - acc(i)) * (ref_sec - sec(j));
                if (v > best[t][j]) {
                    best[t][j] = v;
                    from[t][j] = i;
                }
            }
        }
    }
    std::size_t last = n;
    double top = kNeg;
    for (std::size_t j = 0; j < n; ++j) {
        if (best[k - 1][j] > top) {
            top = best[k - 1][j];
            last = j;
        }
    }
    std::vector<std::size_t> chosen;
    for (std::size_t t = k; t-- > 0;) {
        chosen.push_back(order[last]);
        last = from[t][last];
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

} // namespace flowsearch
