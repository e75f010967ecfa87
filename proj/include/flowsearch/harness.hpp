#pragma once

// Evaluates one flow against a question set, streaming records through the
// pruner, and reduces them to final (or partial) objectives.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "flowsearch/eval_record.hpp"
#include "flowsearch/pareto.hpp"
#include "flowsearch/pruner.hpp"
#include "flowsearch/rng.hpp"
#include "flowsearch/space.hpp"

namespace flowsearch {

struct EvaluatorCaps {
    std::string name;
    int batch_size = 1;
    double timeout_s = 0.0;
};

/// Pass/fail evaluator over (flow, question). Implementations must accept
/// concurrent calls for distinct trials.
class Evaluator {
public:
    virtual ~Evaluator() = default;
    virtual EvaluatorCaps caps() const { return {}; }
    virtual EvalRecord evaluate(const FlowConfig& config, std::int64_t trial_id, const std::string& question) = 0;
};

enum class TrialStatus { running, completed, pruned, failed };

inline const char* to_string(TrialStatus s) {
    switch (s) {
    case TrialStatus::running: return "running";
    case TrialStatus::completed: return "completed";
    case TrialStatus::pruned: return "pruned";
    case TrialStatus::failed: return "failed";
    }
    return "failed";
}

inline TrialStatus parse_trial_status(const std::string& s) {
    if (s == "running") return TrialStatus::running;
    if (s == "completed") return TrialStatus::completed;
    if (s == "pruned") return TrialStatus::pruned;
    if (s == "failed") return TrialStatus::failed;
    throw ConfigError("unknown trial status '" + s + "'");
}

struct PruneEvent {
    PartialEvalStats stats;
    ConfidenceCorner corner;
};

struct TrialOutcome {
    TrialStatus status = TrialStatus::failed;
    std::vector<EvalRecord> records;
    std::optional<ObjectiveVector> objectives;
    std::optional<PruneEvent> prune;
};

struct HarnessOptions {
    std::optional<PrunerConfig> pruner; // empty: evaluate every question
    Secondary secondary = Secondary::cost;
    std::uint64_t order_seed = 0;
    /// Fresh front snapshot, taken at each pruner check.
    std::function<FrontSnapshot()> front;
    /// Receives records in the order evaluated, in batches, at check points and at the end.
    std::function<void(const std::vector<EvalRecord>&)> on_batch;
    /// Batch size when no pruner sets the cadence.
    int flush_interval = 10;
};

/// Question order for a trial: a seeded permutation of the set.
inline std::vector<std::string> shuffled_questions(std::vector<std::string> questions, std::uint64_t seed) {
    Rng rng(seed);
    rng.shuffle(questions);
    return questions;
}

/// Accuracy over all records (errors count as failures); cost and latency are
/// means over successful records.
inline std::optional<ObjectiveVector> reduce_records(const std::vector<EvalRecord>& records) {
    int n = 0, passes = 0, ok = 0;
    double cost = 0.0, lat = 0.0;
    for (const auto& r : records) {
        ++n;
        if (!r.ok()) continue;
        ++ok;
        passes += r.passed;
        cost += r.cost;
        lat += r.latency;
    }
    if (ok == 0) return std::nullopt;
    return ObjectiveVector{static_cast<double>(passes) / n, cost / ok, lat / ok};
}

inline TrialOutcome evaluate_trial(const FlowConfig& config, std::int64_t trial_id, Evaluator& evaluator,
                                   const std::vector<std::string>& questions, const HarnessOptions& opt) {
    if (questions.empty()) throw std::invalid_argument("evaluate_trial: empty question set");
    TrialOutcome out;
    PartialEvalStats stats;
    std::size_t flushed = 0;
    auto flush = [&] {
        if (opt.on_batch && flushed < out.records.size()) {
            opt.on_batch(std::vector<EvalRecord>(out.records.begin() + static_cast<std::ptrdiff_t>(flushed), out.records.end()));
        }
        flushed = out.records.size();
    };

    for (const auto& q : shuffled_questions(questions, opt.order_seed)) {
        auto rec = evaluator.evaluate(config, trial_id, q);
        if (rec.ok() && (rec.cost < 0.0 || rec.latency < 0.0)) rec = EvalRecord::failure(rec.question_id, ErrorTag::protocol);
        stats = update(stats, rec, opt.secondary);
        out.records.push_back(std::move(rec));

        if (opt.pruner) {
            if (!check_due(stats, *opt.pruner)) continue;
            flush();
            // Nothing left to save once every question has been asked.
            if (stats.L == 0 || !opt.front || out.records.size() == questions.size()) continue;
            const auto snap = opt.front();
            if (should_prune(stats, snap, *opt.pruner) == Verdict::prune) {
                out.status = TrialStatus::pruned;
                out.prune = PruneEvent{stats, confidence_corner(stats, *opt.pruner)};
                out.objectives = reduce_records(out.records);
                return out;
            }
        } else if (static_cast<int>(out.records.size() - flushed) >= opt.flush_interval) {
            flush();
        }
    }
    flush();
    out.objectives = reduce_records(out.records);
    out.status = out.objectives ? TrialStatus::completed : TrialStatus::failed;
    return out;
}

} // namespace flowsearch
