#pragma once

// Study reports and plot-data exports. Everything here is recomputed from a
// loaded Study; nothing is cached in the log.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "flowsearch/csv.hpp"
#include "flowsearch/experiments.hpp"
#include "flowsearch/study.hpp"

namespace flowsearch {

struct ReportRow {
    std::int64_t id = 0;
    Origin origin = Origin::sampler;
    TrialStatus status = TrialStatus::completed;
    double accuracy = 0.0;
    double cost = 0.0; // USD per call
    double cost_per_100 = 0.0;
    std::optional<double> latency;
    std::string flow;
    std::string components;
    bool on_front = false;
};

/// "llm=..., retriever=..., splitter=..." plus "+name" for every enabled
/// "<name>_enabled" switch.
inline std::string component_summary(const FlowConfig& c) {
    std::string out;
    auto add = [&](const std::string& s) {
        if (!out.empty()) out += ' ';
        out += s;
    };
    for (const char* key : {"llm", "retriever", "splitter"})
        if (c.contains(key)) add(std::string(key) + "=" + c.get_string(key));
    static const std::string suffix = "_enabled";
    for (const auto& [name, v] : c.assignments()) {
        if (name.size() > suffix.size() && name.ends_with(suffix) && to_string(v) == "true")
            add("+" + name.substr(0, name.size() - suffix.size()));
    }
    return out;
}

inline std::string flow_of(const FlowConfig& c) { return c.get_string("flow", "-"); }

struct PrunerSummary {
    std::size_t pruned = 0;
    std::size_t evaluations = 0;       // final attempts
    std::size_t evaluations_saved = 0; // questions pruned trials never asked
};

struct ReportOptions {
    std::optional<std::int64_t> baseline; // default: the flagged baseline seed
    std::optional<std::pair<double, double>> bounds; // pareto_area bounds on the secondary objective
};

struct Report {
    Secondary secondary = Secondary::cost;
    std::vector<ReportRow> rows; // trials with objectives, secondary ascending
    std::vector<ReportRow> front;
    double hypervolume = 0.0; // reference (bounds.hi, accuracy 0)
    double pareto_area = 0.0;
    double lo = 0.0, hi = 0.0;
    std::optional<std::int64_t> baseline;
    std::optional<BaselineGains> gains;
    PrunerSummary pruner;
    std::size_t trials = 0, completed = 0, failed = 0;
};

namespace detail {

/// Observed span, with headroom above the most expensive trial so that it
/// still contributes area.
inline std::pair<double, double> observed_bounds(const Study& st) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& t : st.trials) {
        if (!t.objectives) continue;
        const double v = secondary_value(*t.objectives, st.front.secondary());
        if (!(v > 0.0)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(hi > 0.0)) return {1.0, 10.0};
    return {lo, hi * 1.1};
}

} // namespace detail

inline Report make_report(const Study& st, const ReportOptions& opt = {}) {
    Report r;
    r.secondary = st.front.secondary();
    r.trials = st.trials.size();
    r.completed = st.count(TrialStatus::completed);
    r.failed = st.count(TrialStatus::failed);
    const auto n_questions = st.config.questions().size();

    for (const auto& t : st.trials) {
        r.pruner.evaluations += t.records.size();
        if (t.status == TrialStatus::pruned) {
            ++r.pruner.pruned;
            if (n_questions > t.records.size()) r.pruner.evaluations_saved += n_questions - t.records.size();
        }
        if (!t.objectives) continue;
        ReportRow row;
        row.id = t.id;
        row.origin = t.origin;
        row.status = t.status;
        row.accuracy = t.objectives->accuracy;
        row.cost = t.objectives->cost;
        row.cost_per_100 = 100.0 * t.objectives->cost;
        row.latency = t.objectives->latency;
        row.flow = flow_of(t.config);
        row.components = component_summary(t.config);
        row.on_front = st.front.contains(t.id);
        r.rows.push_back(std::move(row));
    }
    std::stable_sort(r.rows.begin(), r.rows.end(), [&](const ReportRow& a, const ReportRow& b) {
        const double sa = r.secondary == Secondary::cost ? a.cost : a.latency.value_or(0.0);
        const double sb = r.secondary == Secondary::cost ? b.cost : b.latency.value_or(0.0);
        return sa != sb ? sa < sb : a.id < b.id;
    });
    for (const auto& row : r.rows)
        if (row.on_front) r.front.push_back(row);

    std::tie(r.lo, r.hi) = opt.bounds ? *opt.bounds : detail::observed_bounds(st);
    ObjectiveVector ref{0.0, r.hi, r.hi};
    r.hypervolume = hypervolume(st.front, ref);
    r.pareto_area = pareto_area(st.front, r.lo, r.hi);

    std::optional<std::int64_t> base = opt.baseline;
    if (!base) {
        for (const auto& t : st.trials)
            if (t.baseline && t.status == TrialStatus::completed) {
                base = t.id;
                break;
            }
    }
    if (base) {
        const auto* t = st.find(*base);
        if (!t) throw ConfigError("unknown baseline trial id " + std::to_string(*base));
        if (t->status != TrialStatus::completed)
            throw ConfigError("baseline trial " + std::to_string(*base) + " did not complete (" + to_string(t->status) + ")");
        r.baseline = base;
        r.gains = baseline_gains(st.front, *t->objectives);
    }
    return r;
}

namespace detail {

inline std::string fixed(double v, int prec) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << v;
    return os.str();
}

inline void write_table(std::ostream& os, const std::vector<ReportRow>& rows, bool per_100) {
    os << std::left << std::setw(6) << "id" << std::setw(9) << "acc" << std::setw(13) << (per_100 ? "$/100calls" : "$/call")
       << std::setw(9) << "lat_s" << std::setw(10) << "status" << std::setw(3) << "*" << std::setw(20) << "flow"
       << "components\n";
    for (const auto& r : rows) {
        os << std::left << std::setw(6) << r.id << std::setw(9) << fixed(r.accuracy, 4) << std::setw(13)
           << fixed(per_100 ? r.cost_per_100 : r.cost, 6) << std::setw(9) << (r.latency ? fixed(*r.latency, 2) : "-")
           << std::setw(10) << to_string(r.status) << std::setw(3) << (r.on_front ? "*" : "") << std::setw(20) << r.flow
           << r.components << "\n";
    }
}

} // namespace detail

inline void write_report_text(std::ostream& os, const Report& r, bool per_100 = true, bool full_table = true) {
    os << "trials " << r.trials << "  completed " << r.completed << "  pruned " << r.pruner.pruned << "  failed " << r.failed
       << "\n";
    os << "objective accuracy vs " << to_string(r.secondary) << "\n";
    os << "hypervolume " << detail::fixed(r.hypervolume, 6) << "  pareto_area " << detail::fixed(r.pareto_area, 4) << "  bounds ["
       << r.lo << ", " << r.hi << "]\n";
    os << "evaluations " << r.pruner.evaluations << "  saved by pruning " << r.pruner.evaluations_saved << "\n";
    if (r.gains) {
        os << "baseline trial " << *r.baseline << ": accuracy " << (r.gains->accuracy_delta >= 0 ? "+" : "")
           << detail::fixed(r.gains->accuracy_delta, 4) << (r.gains->iso_cost_extrapolated ? " (extrapolated)" : "")
           << " at iso-" << to_string(r.secondary) << ", " << to_string(r.secondary) << " reduction "
           << (r.gains->cost_reduction ? detail::fixed(*r.gains->cost_reduction, 4) : std::string("undefined"))
           << " at iso-accuracy\n";
    } else {
        os << "baseline: none\n";
    }
    os << "\nfront (" << r.front.size() << ")\n";
    detail::write_table(os, r.front, per_100);
    if (full_table) {
        os << "\nall trials (" << r.rows.size() << ")\n";
        detail::write_table(os, r.rows, per_100);
    }
}

inline json report_to_json(const Report& r) {
    auto rows = [](const std::vector<ReportRow>& rs) {
        json a = json::array();
        for (const auto& x : rs)
            a.push_back({{"id", x.id},
                         {"origin", to_string(x.origin)},
                         {"status", to_string(x.status)},
                         {"accuracy", x.accuracy},
                         {"cost_usd", x.cost},
                         {"cost_per_100", x.cost_per_100},
                         {"latency_s", x.latency ? json(*x.latency) : json(nullptr)},
                         {"flow", x.flow},
                         {"components", x.components},
                         {"on_front", x.on_front}});
        return a;
    };
    json j = {{"trials", r.trials},
              {"completed", r.completed},
              {"failed", r.failed},
              {"secondary", to_string(r.secondary)},
              {"hypervolume", r.hypervolume},
              {"pareto_area", r.pareto_area},
              {"bounds", {r.lo, r.hi}},
              {"pruner", {{"pruned", r.pruner.pruned}, {"evaluations", r.pruner.evaluations}, {"evaluations_saved", r.pruner.evaluations_saved}}},
              {"front", rows(r.front)},
              {"rows", rows(r.rows)}};
    if (r.gains) {
        j["baseline"] = {{"trial", *r.baseline},
                         {"accuracy_delta", r.gains->accuracy_delta},
                         {"iso_cost_extrapolated", r.gains->iso_cost_extrapolated},
                         {"cost_reduction", r.gains->cost_reduction ? json(*r.gains->cost_reduction) : json(nullptr)}};
    } else {
        j["baseline"] = nullptr;
    }
    return j;
}

// ---- plot data ----

inline const std::vector<std::string> kFrontCsvHeader = {"trial_id", "accuracy", "cost_usd", "log10_cost", "on_front", "flow", "llm"};

/// Completed trials, cost ascending then id. Re-importing the rows and taking
/// front_of on (accuracy, cost) gives back the study's cost front.
inline void write_front_csv(std::ostream& os, const Study& st) {
    std::vector<const Trial*> ts;
    for (const auto& t : st.trials)
        if (t.status == TrialStatus::completed) ts.push_back(&t);
    std::stable_sort(ts.begin(), ts.end(), [](const Trial* a, const Trial* b) {
        return a->objectives->cost != b->objectives->cost ? a->objectives->cost < b->objectives->cost : a->id < b->id;
    });
    csv::write_row(os, kFrontCsvHeader);
    for (const auto* t : ts) {
        const auto& o = *t->objectives;
        csv::write_row(os, {std::to_string(t->id), csv::num(o.accuracy), csv::num(o.cost), csv::num(std::log10(o.cost)),
                            st.front.contains(t->id) ? "1" : "0", flow_of(t->config), t->config.get_string("llm", "-")});
    }
}

struct FrontCsvRow {
    std::int64_t id = 0;
    ObjectiveVector objectives;
    bool on_front = false;
};

inline std::vector<FrontCsvRow> read_front_csv(std::istream& is) {
    std::vector<std::string> cells;
    if (!csv::read_row(is, cells) || cells != kFrontCsvHeader) throw ConfigError("front csv: unexpected header");
    std::vector<FrontCsvRow> out;
    for (int line = 2; csv::read_row(is, cells); ++line) {
        if (cells.size() == 1 && cells[0].empty()) continue;
        if (cells.size() != kFrontCsvHeader.size()) throw ConfigError("front csv: wrong column count on line " + std::to_string(line));
        try {
            FrontCsvRow r;
            r.id = std::stoll(cells[0]);
            r.objectives.accuracy = std::stod(cells[1]);
            r.objectives.cost = std::stod(cells[2]);
            r.on_front = cells[4] == "1";
            out.push_back(r);
        } catch (const std::exception&) {
            throw ConfigError("front csv: bad number on line " + std::to_string(line));
        }
    }
    return out;
}

inline ParetoFront front_from_csv_rows(const std::vector<FrontCsvRow>& rows) {
    std::vector<FrontEntry> pts;
    for (const auto& r : rows) pts.push_back({r.id, r.objectives});
    return front_of(pts);
}

/// One row per (rep, arm, trial count). Arms of the same rep share the seed.
inline void write_ablation_csv(std::ostream& os, const AblationReport& a) {
    csv::write_row(os, {"rep", "seed", "arm", "trials", "evaluations", "spend_usd", "area_ratio"});
    for (std::size_t i = 0; i < a.reps.size(); ++i) {
        const auto& r = a.reps[i];
        for (const auto& [arm, c] : {std::pair<const char*, const ArmCurve*>{"pruner", &r.on}, {"no-pruner", &r.off}}) {
            for (std::size_t t = 0; t < c->area.size(); ++t)
                csv::write_row(os, {std::to_string(i), std::to_string(r.seed), arm, std::to_string(t + 1),
                                    std::to_string(c->evaluations[t]), csv::num(c->spend_usd[t]), csv::num(c->area[t])});
        }
    }
}

inline void write_seeding_csv(std::ostream& os, const SeedingComparison& s) {
    csv::write_row(os, {"arm", "rep", "seed", "trials", "evaluations", "area_ratio"});
    std::map<SeedingArm, int> rep_index;
    for (const auto& run : s.runs) {
        const int rep = rep_index[run.arm]++;
        for (std::size_t t = 0; t < run.curve.area.size(); ++t)
            csv::write_row(os, {to_string(run.arm), std::to_string(rep), std::to_string(run.seed), std::to_string(t + 1),
                                std::to_string(run.curve.evaluations[t]), csv::num(run.curve.area[t])});
    }
}

/// Transfer pool with cluster assignments, for inspecting the selection.
inline void write_cluster_csv(std::ostream& os, const TransferResult& r) {
    csv::write_row(os, {"prior", "depth", "cluster", "selected", "accuracy", "cost_usd", "config"});
    for (const auto& m : r.pool)
        csv::write_row(os, {std::to_string(m.study), std::to_string(m.depth), std::to_string(m.cluster), m.selected ? "1" : "0",
                            csv::num(m.objectives.accuracy), csv::num(m.objectives.cost), config_to_record(m.config)});
}

} // namespace flowsearch
