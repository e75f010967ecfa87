#pragma once

// Study orchestration: seed plan, ask/tell loop, concurrent trials, append-only
// log, and resume.
//
// Log: one JSON object per line, every record carrying "v":1, "type", and a
// wall-clock "ts" (the only field that varies between identical runs).
//
//   study-meta    {"config": <resolved StudyConfig>}
//   seed-plan     {"entries": [{"origin","label","baseline","config"}], "warnings": [...]}
//   trial-start   {"trial","attempt","origin","label","baseline","config"}
//   eval-batch    {"trial","attempt","records": [{"q","passed","cost","latency","error"}]}
//   prune         {"trial","attempt","stats": {...}, "corner": {...}, "front": [{"id","accuracy","cost","latency"}]}
//   trial-end     {"trial","attempt","status","objectives": {...}|null,"n_evals","reason"?}
//   front-update  {"trial","front": [ids]}
//
// A trial-start without a matching trial-end is an interrupted attempt; resume
// closes it as failed("interrupted") and re-runs the same id as attempt+1.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "flowsearch/desk.hpp"
#include "flowsearch/errors.hpp"
#include "flowsearch/external.hpp"
#include "flowsearch/harness.hpp"
#include "flowsearch/motpe.hpp"
#include "flowsearch/pareto.hpp"
#include "flowsearch/pruner.hpp"
#include "flowsearch/rng.hpp"
#include "flowsearch/seeding.hpp"
#include "flowsearch/sim.hpp"
#include "flowsearch/space.hpp"
#include "flowsearch/space_io.hpp"

namespace flowsearch {

inline constexpr int kLogVersion = 1;

// ---- configuration ----

struct TransferSeeding {
    std::vector<std::string> priors; // study log paths
    int k_fronts = 2;
    int n_select = 10;
};

struct SeedingConfig {
    bool use_static = true;
    int random = 100;
    std::optional<std::string> file;
    std::optional<TransferSeeding> transfer;
};

struct SimulatedBinding {
    SimBenchmarkSpec spec;
};

struct ExternalBinding {
    std::vector<std::string> command;
    std::vector<std::string> questions;
    double timeout_s = 30.0;
    int max_retries = 3;
    double backoff_base_s = 0.5;
};

struct StudyConfig {
    std::string name = "study";
    SearchSpace space;
    Secondary secondary = Secondary::cost;
    SeedingConfig seeding;
    TpeConfig tpe;
    std::optional<PrunerConfig> pruner = PrunerConfig{};
    int max_trials = 200;
    int parallelism = 1;
    std::uint64_t seed = 0;
    std::variant<SimulatedBinding, ExternalBinding> evaluator;
    std::string storage = "study.jsonl"; // empty: keep the log in memory

    bool simulated() const { return std::holds_alternative<SimulatedBinding>(evaluator); }
    const SimBenchmarkSpec& sim_spec() const { return std::get<SimulatedBinding>(evaluator).spec; }

    std::vector<std::string> questions() const {
        if (simulated()) return sim_spec().questions();
        return std::get<ExternalBinding>(evaluator).questions;
    }
};

namespace detail {

inline std::string resolve_path(const std::string& p, const std::filesystem::path& base) {
    if (p.empty() || base.empty()) return p;
    std::filesystem::path fp(p);
    return fp.is_absolute() ? p : (base / fp).lexically_normal().string();
}

inline std::vector<std::string> numbered_questions(int n) {
    std::vector<std::string> q;
    char buf[16];
    for (int i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof buf, "q%04d", i);
        q.emplace_back(buf);
    }
    return q;
}

inline SearchSpace space_from_ref(const json& ref, const std::filesystem::path& base) {
    if (ref.is_object()) return space_from_json(ref);
    if (!ref.is_string()) throw ConfigError("'space' must be an object, a file path, or builtin:<name>");
    const auto s = ref.get<std::string>();
    if (s.rfind("builtin:", 0) == 0) return builtin_space(s.substr(8));
    return load_space_file(resolve_path(s, base));
}

inline SimBenchmarkSpec benchmark_from_ref(const json& ref, const std::filesystem::path& base) {
    if (ref.is_object()) {
        if (ref.contains("space") && ref["space"].is_string()) {
            const auto sp = space_from_ref(ref["space"], base);
            return sim_spec_from_json(ref, &sp);
        }
        return sim_spec_from_json(ref);
    }
    if (!ref.is_string()) throw ConfigError("'benchmark' must be an object, a file path, or a builtin name");
    auto s = ref.get<std::string>();
    if (s.rfind("builtin:", 0) == 0) s = s.substr(8);
    if (s == "desk-1" || s == "desk-2") return builtin_benchmark(s);
    const std::string path = resolve_path(s, base);
    const auto j = read_json_file(path);
    const auto dir = std::filesystem::path(path).parent_path();
    if (j.contains("space") && j["space"].is_string()) {
        const auto sp = space_from_ref(j["space"], dir);
        return sim_spec_from_json(j, &sp);
    }
    return sim_spec_from_json(j);
}

} // namespace detail

inline void validate(const StudyConfig& c) {
    if (c.parallelism < 1) throw ConfigError("parallelism must be >= 1");
    if (c.max_trials < 1) throw ConfigError("max_trials must be >= 1");
    if (c.seeding.random < 0) throw ConfigError("seeding.random must be >= 0");
    auto rep = validate(c.space);
    if (!rep.ok()) throw ConfigError("space invalid: " + rep.summary());
    c.tpe.validate();
    if (c.pruner) c.pruner->validate();
    if (c.seeding.transfer) {
        if (c.seeding.transfer->k_fronts < 1) throw ConfigError("seeding.transfer.k_fronts must be >= 1");
        if (c.seeding.transfer->n_select < 0) throw ConfigError("seeding.transfer.n_select must be >= 0");
    }
    if (c.simulated()) {
        c.sim_spec().validate();
        if (space_to_json(c.sim_spec().space) != space_to_json(c.space))
            throw ConfigError("study space differs from the simulated benchmark's space");
    } else {
        const auto& e = std::get<ExternalBinding>(c.evaluator);
        if (e.command.empty()) throw ConfigError("external evaluator needs a command");
        if (e.questions.empty()) throw ConfigError("external evaluator needs questions");
        if (!(e.timeout_s > 0.0)) throw ConfigError("external timeout_s must be positive");
        if (e.max_retries < 0) throw ConfigError("external max_retries must be >= 0");
    }
}

/// Parses a study config. Relative paths resolve against `base_dir`.
inline StudyConfig study_config_from_json(const json& j, const std::filesystem::path& base_dir = {}) {
    try {
        if (!j.is_object()) throw ConfigError("study config must be an object");
        static const std::set<std::string> known = {"name", "space", "objective", "seeding", "tpe", "pruner", "max_trials",
                                                    "parallelism", "seed", "evaluator", "storage"};
        for (const auto& [k, _] : j.items())
            if (!known.count(k)) throw ConfigError("unknown study config key '" + k + "'");
        StudyConfig c;
        c.name = j.value("name", c.name);

        const json ev = j.value("evaluator", json{{"kind", "simulated"}, {"benchmark", "desk-1"}});
        const auto kind = ev.value("kind", std::string("simulated"));
        if (kind == "simulated") {
            SimulatedBinding b{detail::benchmark_from_ref(ev.value("benchmark", json("desk-1")), base_dir)};
            if (ev.contains("seed")) b.spec.seed = ev.at("seed").get<std::uint64_t>();
            if (ev.contains("num_questions")) b.spec.num_questions = ev.at("num_questions").get<int>();
            c.space = j.contains("space") ? detail::space_from_ref(j.at("space"), base_dir) : b.spec.space;
            c.evaluator = std::move(b);
        } else if (kind == "external") {
            ExternalBinding b;
            b.command = ev.at("command").get<std::vector<std::string>>();
            if (!b.command.empty() && b.command[0].find('/') != std::string::npos)
                b.command[0] = detail::resolve_path(b.command[0], base_dir);
            if (ev.contains("questions")) {
                b.questions = ev.at("questions").get<std::vector<std::string>>();
            } else {
                b.questions = detail::numbered_questions(ev.value("num_questions", 100));
            }
            b.timeout_s = ev.value("timeout_s", b.timeout_s);
            b.max_retries = ev.value("max_retries", b.max_retries);
            b.backoff_base_s = ev.value("backoff_base_s", b.backoff_base_s);
            c.space = detail::space_from_ref(j.value("space", json("builtin:default")), base_dir);
            c.evaluator = std::move(b);
        } else {
            throw ConfigError("unknown evaluator kind '" + kind + "'");
        }

        const auto obj = j.value("objective", std::string("cost"));
        if (obj == "cost") {
            c.secondary = Secondary::cost;
        } else if (obj == "latency") {
            c.secondary = Secondary::latency;
        } else {
            throw ConfigError("objective must be 'cost' or 'latency'");
        }

        if (j.contains("seeding")) {
            const auto& s = j.at("seeding");
            c.seeding.use_static = s.value("static", true);
            c.seeding.random = s.value("random", 100);
            if (s.contains("file")) c.seeding.file = detail::resolve_path(s.at("file").get<std::string>(), base_dir);
            if (s.contains("transfer") && !s.at("transfer").is_null()) {
                const auto& t = s.at("transfer");
                TransferSeeding ts;
                for (const auto& p : t.at("priors").get<std::vector<std::string>>()) ts.priors.push_back(detail::resolve_path(p, base_dir));
                ts.k_fronts = t.value("k_fronts", ts.k_fronts);
                ts.n_select = t.value("n_select", ts.n_select);
                c.seeding.transfer = ts;
            }
        }
        if (j.contains("tpe")) {
            const auto& t = j.at("tpe");
            c.tpe.gamma = t.value("gamma", c.tpe.gamma);
            c.tpe.n_candidates = t.value("n_candidates", c.tpe.n_candidates);
            c.tpe.prior_weight = t.value("prior_weight", c.tpe.prior_weight);
            c.tpe.min_history = t.value("min_history", c.tpe.min_history);
            c.tpe.prefer_novel = t.value("prefer_novel", c.tpe.prefer_novel);
        }
        if (j.contains("pruner")) {
            const auto& p = j.at("pruner");
            if (p.is_null() || (p.is_boolean() && !p.get<bool>())) {
                c.pruner.reset();
            } else if (p.is_object()) {
                PrunerConfig pc;
                pc.z = p.value("z", pc.z);
                pc.min_evals = p.value("min_evals", pc.min_evals);
                pc.check_interval = p.value("check_interval", pc.check_interval);
                const auto cm = p.value("cost_model", std::string("normal"));
                if (cm == "normal") {
                    pc.cost_model = CostModel::normal;
                } else if (cm == "lognormal") {
                    pc.cost_model = CostModel::lognormal;
                } else {
                    throw ConfigError("pruner.cost_model must be 'normal' or 'lognormal'");
                }
                c.pruner = pc;
            } else if (!p.is_boolean()) {
                throw ConfigError("pruner must be an object, true, false, or null");
            }
        }
        c.max_trials = j.value("max_trials", c.max_trials);
        c.parallelism = j.value("parallelism", c.parallelism);
        c.seed = j.value("seed", c.seed);
        if (j.contains("storage")) c.storage = detail::resolve_path(j.at("storage").get<std::string>(), base_dir);
        validate(c);
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed study config: ") + e.what());
    }
}

/// Fully resolved form: inline space and benchmark, so a log is self-contained.
inline json study_config_to_json(const StudyConfig& c) {
    json j;
    j["name"] = c.name;
    j["space"] = space_to_json(c.space);
    j["objective"] = to_string(c.secondary);
    json s = {{"static", c.seeding.use_static}, {"random", c.seeding.random}};
    if (c.seeding.file) s["file"] = *c.seeding.file;
    if (c.seeding.transfer)
        s["transfer"] = {{"priors", c.seeding.transfer->priors}, {"k_fronts", c.seeding.transfer->k_fronts}, {"n_select", c.seeding.transfer->n_select}};
    j["seeding"] = s;
    j["tpe"] = {{"gamma", c.tpe.gamma}, {"n_candidates", c.tpe.n_candidates}, {"prior_weight", c.tpe.prior_weight}, {"min_history", c.tpe.min_history},
                 {"prefer_novel", c.tpe.prefer_novel}};
    if (c.pruner) {
        j["pruner"] = {{"z", c.pruner->z}, {"min_evals", c.pruner->min_evals}, {"check_interval", c.pruner->check_interval},
                       {"cost_model", to_string(c.pruner->cost_model)}};
    } else {
        j["pruner"] = nullptr;
    }
    j["max_trials"] = c.max_trials;
    j["parallelism"] = c.parallelism;
    j["seed"] = c.seed;
    if (c.simulated()) {
        j["evaluator"] = {{"kind", "simulated"}, {"benchmark", sim_spec_to_json(c.sim_spec())}};
    } else {
        const auto& e = std::get<ExternalBinding>(c.evaluator);
        j["evaluator"] = {{"kind", "external"}, {"command", e.command}, {"questions", e.questions}, {"timeout_s", e.timeout_s},
                          {"max_retries", e.max_retries}, {"backoff_base_s", e.backoff_base_s}};
    }
    j["storage"] = c.storage;
    return j;
}

/// FLOWSEARCH_STORAGE and FLOWSEARCH_PARALLELISM override the file.
inline void apply_env_overrides(StudyConfig& c) {
    if (const char* s = std::getenv("FLOWSEARCH_STORAGE"); s && *s) c.storage = s;
    if (const char* p = std::getenv("FLOWSEARCH_PARALLELISM"); p && *p) {
        char* end = nullptr;
        const long v = std::strtol(p, &end, 10);
        if (*end != '\0' || v < 1) throw ConfigError("FLOWSEARCH_PARALLELISM must be a positive integer");
        c.parallelism = static_cast<int>(v);
    }
}

inline StudyConfig load_study_config(const std::string& path) {
    const auto j = read_json_file(path);
    auto c = study_config_from_json(j, std::filesystem::path(path).parent_path());
    apply_env_overrides(c);
    validate(c);
    return c;
}

// ---- study state ----

struct Trial {
    std::int64_t id = 0;
    int attempt = 0;
    Origin origin = Origin::sampler;
    std::string label;
    bool baseline = false;
    FlowConfig config;
    TrialStatus status = TrialStatus::running;
    std::optional<ObjectiveVector> objectives;
    std::vector<EvalRecord> records; // latest attempt
    std::optional<PruneEvent> prune;
    std::vector<FrontEntry> prune_front; // snapshot the prune decision saw
    std::string reason;
    std::string started;
    std::string ended;
};

struct Study {
    StudyConfig config;
    SeedPlan plan;
    std::vector<std::string> seed_warnings;
    std::vector<Trial> trials; // by id, latest attempt
    std::vector<std::int64_t> end_order; // ids in trial-end order (final attempts)
    ParetoFront front{Secondary::cost};
    std::vector<std::string> warnings;
    int interrupted = 0; // attempts closed as interrupted
    std::size_t total_evaluations = 0; // over all attempts

    const Trial* find(std::int64_t id) const {
        return id >= 0 && static_cast<std::size_t>(id) < trials.size() ? &trials[static_cast<std::size_t>(id)] : nullptr;
    }
    /// Evaluations of the final attempts only.
    std::size_t evaluations() const {
        std::size_t n = 0;
        for (const auto& t : trials) n += t.records.size();
        return n;
    }
    std::size_t count(TrialStatus s) const {
        return static_cast<std::size_t>(std::count_if(trials.begin(), trials.end(), [&](const Trial& t) { return t.status == s; }));
    }
};

// ---- log I/O ----

/// Thrown by the fault hook to simulate a crash mid-study.
class InjectedCrash : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FaultInjection {
    std::size_t crash_before_record = 0; // 1-based record number on which to crash; 0 disables
    bool partial_line = false; // leave half of that record behind
};

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const auto t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                  tm.tm_min, tm.tm_sec, static_cast<int>(ms));
    return buf;
}

class LogWriter {
public:
    /// Appends to `path`; an empty path keeps the log in memory.
    explicit LogWriter(const std::string& path, FaultInjection fault = {}) : path_(path), fault_(fault) {
        if (!path_.empty()) {
            if (auto dir = std::filesystem::path(path_).parent_path(); !dir.empty()) {
                std::error_code ec;
                std::filesystem::create_directories(dir, ec);
            }
            out_.open(path_, std::ios::app | std::ios::binary);
            if (!out_) throw StorageError("cannot open study log '" + path_ + "' for writing");
        }
    }

    /// Seeds the in-memory buffer when resuming a memory-only log.
    void preload(std::string text) { memory_ = std::move(text); }

    void append(json rec) {
        // A crashed process writes nothing more; other workers stop here too.
        if (crashed_) throw InjectedCrash("log closed by injected crash");
        ++written_;
        rec["v"] = kLogVersion;
        rec["ts"] = utc_timestamp();
        const std::string line = rec.dump();
        if (fault_.crash_before_record && written_ == fault_.crash_before_record) {
            if (fault_.partial_line) emit(line.substr(0, line.size() / 2));
            crashed_ = true;
            throw InjectedCrash("injected crash before log record " + std::to_string(written_));
        }
        emit(line + "\n");
    }

    const std::string& memory() const { return memory_; }
    std::size_t written() const { return written_; }

private:
    void emit(const std::string& s) {
        if (path_.empty()) {
            memory_ += s;
            return;
        }
        out_ << s;
        out_.flush();
        if (!out_) throw StorageError("write to study log '" + path_ + "' failed");
    }

    std::string path_;
    FaultInjection fault_;
    bool crashed_ = false;
    std::ofstream out_;
    std::string memory_;
    std::size_t written_ = 0;
};

struct LogContents {
    std::vector<json> records;
    std::vector<std::string> warnings;
    std::size_t valid_bytes = 0; // prefix holding complete records
    bool truncated_tail = false;
};

/// Parses log text. An unparseable final line (crash mid-write) is dropped with
/// a warning; an unparseable line anywhere else is corruption.
inline LogContents parse_log(const std::string& text) {
    LogContents out;
    std::size_t pos = 0;
    int lineno = 0;
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        const bool last = nl == std::string::npos || nl + 1 >= text.size();
        const std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        ++lineno;
        const std::size_t next = nl == std::string::npos ? text.size() : nl + 1;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            pos = next;
            if (nl != std::string::npos) out.valid_bytes = next;
            continue;
        }
        json j;
        bool ok = true;
        try {
            j = json::parse(line);
        } catch (const json::exception&) {
            ok = false;
        }
        if (ok && (!j.is_object() || !j.contains("type"))) ok = false;
        if (!ok || nl == std::string::npos) {
            if (last) {
                out.truncated_tail = true;
                out.warnings.push_back("study log: dropped incomplete final record at line " + std::to_string(lineno));
                break;
            }
            throw StorageError("study log corrupted at line " + std::to_string(lineno));
        }
        if (!j.contains("v") || j["v"] != kLogVersion) throw StorageError("study log line " + std::to_string(lineno) + ": unsupported version");
        out.records.push_back(std::move(j));
        pos = next;
        out.valid_bytes = next;
    }
    return out;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StorageError("cannot open study log '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Log text with every "ts" field removed, for run-to-run comparison.
inline std::string strip_timestamps(const std::string& text) {
    std::string out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = json::parse(line);
        j.erase("ts");
        out += j.dump();
        out += '\n';
    }
    return out;
}

namespace detail {

inline json record_to_json(const EvalRecord& r) {
    json j = {{"q", r.question_id}, {"passed", r.passed}};
    if (r.ok()) {
        j["cost"] = r.cost;
        j["latency"] = r.latency;
        j["error"] = nullptr;
    } else {
        j["error"] = to_string(*r.error);
    }
    return j;
}

inline EvalRecord record_from_json(const json& j) {
    if (j.contains("error") && !j["error"].is_null()) {
        auto tag = parse_error_tag(j["error"].get<std::string>());
        if (!tag) throw StorageError("study log: unknown error tag");
        return EvalRecord::failure(j.at("q").get<std::string>(), *tag);
    }
    return EvalRecord::success(j.at("q").get<std::string>(), j.at("passed").get<bool>(), j.at("cost").get<double>(),
                               j.at("latency").get<double>());
}

inline json objectives_to_json(const std::optional<ObjectiveVector>& o) {
    if (!o) return nullptr;
    json j = {{"accuracy", o->accuracy}, {"cost", o->cost}};
    j["latency"] = o->latency ? json(*o->latency) : json(nullptr);
    return j;
}

inline std::optional<ObjectiveVector> objectives_from_json(const json& j) {
    if (j.is_null()) return std::nullopt;
    ObjectiveVector o{j.at("accuracy").get<double>(), j.at("cost").get<double>(), std::nullopt};
    if (j.contains("latency") && !j["latency"].is_null()) o.latency = j["latency"].get<double>();
    return o;
}

inline json front_entries_json(const std::vector<FrontEntry>& es) {
    json a = json::array();
    for (const auto& e : es) {
        json o = objectives_to_json(e.objectives);
        o["id"] = e.id;
        a.push_back(o);
    }
    return a;
}

inline std::vector<FrontEntry> front_entries_from_json(const json& a) {
    std::vector<FrontEntry> out;
    for (const auto& e : a) out.push_back({e.at("id").get<std::int64_t>(), *objectives_from_json(e)});
    return out;
}

inline json stats_json(const PartialEvalStats& s) {
    return {{"N", s.N}, {"L", s.L}, {"passes", s.passes}, {"a", s.a()}, {"c", s.c}, {"sigma_c", s.sigma_c}, {"costs", s.costs}};
}

inline PartialEvalStats stats_from_json(const json& j) {
    PartialEvalStats s;
    s.N = j.at("N").get<int>();
    s.L = j.at("L").get<int>();
    s.passes = j.at("passes").get<int>();
    s.c = j.at("c").get<double>();
    s.sigma_c = j.at("sigma_c").get<double>();
    s.costs = j.at("costs").get<std::vector<double>>();
    return s;
}

inline json plan_json(const SeedPlan& plan, const std::vector<std::string>& warnings) {
    json es = json::array();
    for (const auto& e : plan.entries)
        es.push_back({{"origin", to_string(e.origin)}, {"label", e.label}, {"baseline", e.baseline}, {"config", config_to_json(e.config)}});
    return {{"type", "seed-plan"}, {"entries", es}, {"warnings", warnings}};
}

} // namespace detail

/// Completed trials of a finished (or partial) study log, for transfer seeding.
inline PriorStudy prior_from_log(const std::string& path);

// ---- seed plan ----

struct PlanResult {
    SeedPlan plan;
    std::vector<std::string> warnings;
};

/// Static seeds, then transfer seeds, then seed-file entries, then random draws.
inline PlanResult build_seed_plan(const StudyConfig& c) {
    PlanResult out;
    if (c.seeding.use_static) {
        auto st = static_seeds(c.space);
        out.warnings.insert(out.warnings.end(), st.warnings.begin(), st.warnings.end());
        for (auto& e : st.seeds) out.plan.entries.push_back(std::move(e));
    }
    if (c.seeding.transfer && c.seeding.transfer->n_select > 0) {
        std::vector<PriorStudy> priors;
        for (const auto& p : c.seeding.transfer->priors) priors.push_back(prior_from_log(p));
        Rng rng(hash_combine({c.seed, hash_string("transfer")}));
        auto tr = transfer_seeds(priors, c.space, c.seeding.transfer->k_fronts, static_cast<std::size_t>(c.seeding.transfer->n_select),
                                 rng, c.secondary);
        out.warnings.insert(out.warnings.end(), tr.warnings.begin(), tr.warnings.end());
        int i = 0;
        for (auto& cfg : tr.seeds) out.plan.entries.push_back({std::move(cfg), Origin::transfer_seed, "transfer-" + std::to_string(i++), false});
    }
    if (c.seeding.file) {
        std::ifstream in(*c.seeding.file);
        if (!in) throw ConfigError("cannot open seed file '" + *c.seeding.file + "'");
        int i = 0;
        for (auto& cfg : read_seed_file(in, c.space))
            out.plan.entries.push_back({std::move(cfg), Origin::static_seed, "file-" + std::to_string(i++), false});
    }
    if (c.seeding.random > 0) {
        Rng rng(hash_combine({c.seed, hash_string("random-seeds")}));
        int i = 0;
        for (auto& cfg : random_seeds(c.space, static_cast<std::size_t>(c.seeding.random), rng))
            out.plan.entries.push_back({std::move(cfg), Origin::random_seed, "random-" + std::to_string(i++), false});
    }
    if (out.plan.size() > static_cast<std::size_t>(c.max_trials))
        throw ConfigError("seed plan has " + std::to_string(out.plan.size()) + " entries but max_trials is " + std::to_string(c.max_trials));
    return out;
}

inline std::unique_ptr<Evaluator> make_evaluator(const StudyConfig& c) {
    if (c.simulated()) return std::make_unique<SimEvaluator>(c.sim_spec());
    const auto& e = std::get<ExternalBinding>(c.evaluator);
    ExternalSettings s;
    s.command = e.command;
    s.timeout_s = e.timeout_s;
    s.max_retries = e.max_retries;
    s.backoff_base_s = e.backoff_base_s;
    s.jitter_seed = hash_combine({c.seed, hash_string("jitter")});
    return std::make_unique<ExternalEvaluator>(std::move(s));
}

struct RunOptions {
    FaultInjection fault;
    std::optional<int> parallelism; // overrides the config
    std::function<void(const std::string&)> warn;
    std::function<void(const Trial&)> on_trial_end;
    /// Supplies the evaluator instead of building it from the config.
    std::function<std::unique_ptr<Evaluator>(const StudyConfig&)> evaluator_factory;
    /// Receives the log text of a memory-only study.
    std::string* memory_log = nullptr;
};

namespace detail {

/// Maps evaluator exceptions to protocol-error records so a misbehaving
/// evaluator fails trials instead of the study.
class GuardedEvaluator final : public Evaluator {
public:
    explicit GuardedEvaluator(Evaluator& inner) : inner_(inner) {}
    EvaluatorCaps caps() const override { return inner_.caps(); }
    EvalRecord evaluate(const FlowConfig& cfg, std::int64_t trial, const std::string& q) override {
        try {
            auto r = inner_.evaluate(cfg, trial, q);
            r.question_id = q;
            return r;
        } catch (const std::exception&) {
            return EvalRecord::failure(q, ErrorTag::protocol);
        }
    }

private:
    Evaluator& inner_;
};

/// Replays log records into study state. Used by load and resume alike.
inline void replay(Study& st, const std::vector<json>& recs) {
    for (const auto& r : recs) {
        const auto type = r.at("type").get<std::string>();
        if (type == "study-meta") {
            continue;
        } else if (type == "seed-plan") {
            st.plan.entries.clear();
            for (const auto& e : r.at("entries"))
                st.plan.entries.push_back({config_from_json(st.config.space, e.at("config")), parse_origin(e.at("origin").get<std::string>()),
                                           e.value("label", std::string{}), e.value("baseline", false)});
            st.seed_warnings = r.value("warnings", std::vector<std::string>{});
        } else if (type == "trial-start") {
            const auto id = r.at("trial").get<std::int64_t>();
            if (id < 0) throw StorageError("study log: negative trial id");
            if (static_cast<std::size_t>(id) >= st.trials.size()) st.trials.resize(static_cast<std::size_t>(id) + 1);
            Trial t;
            t.id = id;
            t.attempt = r.at("attempt").get<int>();
            t.origin = parse_origin(r.at("origin").get<std::string>());
            t.label = r.value("label", std::string{});
            t.baseline = r.value("baseline", false);
            t.config = config_from_json(st.config.space, r.at("config"));
            t.started = r.value("ts", std::string{});
            st.trials[static_cast<std::size_t>(id)] = std::move(t);
        } else if (type == "eval-batch" || type == "prune" || type == "trial-end") {
            const auto id = r.at("trial").get<std::int64_t>();
            if (id < 0 || static_cast<std::size_t>(id) >= st.trials.size()) throw StorageError("study log: record for unknown trial");
            auto& t = st.trials[static_cast<std::size_t>(id)];
            if (r.at("attempt").get<int>() != t.attempt) throw StorageError("study log: record for stale attempt");
            if (type == "eval-batch") {
                for (const auto& e : r.at("records")) t.records.push_back(record_from_json(e));
                st.total_evaluations += r.at("records").size();
            } else if (type == "prune") {
                t.prune = PruneEvent{stats_from_json(r.at("stats")),
                                     {r.at("corner").at("c_low").get<double>(), r.at("corner").at("a_high").get<double>(),
                                      r.at("corner").at("c_center").get<double>()}};
                t.prune_front = front_entries_from_json(r.at("front"));
            } else {
                if (t.status != TrialStatus::running) throw StorageError("study log: trial ended twice");
                t.status = parse_trial_status(r.at("status").get<std::string>());
                t.objectives = objectives_from_json(r.at("objectives"));
                t.reason = r.value("reason", std::string{});
                t.ended = r.value("ts", std::string{});
                if (t.reason == "interrupted") {
                    ++st.interrupted;
                } else {
                    st.end_order.push_back(id);
                    if (t.status == TrialStatus::completed && t.objectives) st.front.insert({id, *t.objectives});
                }
            }
        } else if (type == "front-update") {
            continue;
        } else {
            st.warnings.push_back("study log: ignored record of unknown type '" + type + "'");
        }
    }
}

inline StudyConfig config_from_meta(const std::vector<json>& recs) {
    if (recs.empty() || recs.front().value("type", std::string{}) != "study-meta")
        throw StorageError("study log does not start with a study-meta record");
    try {
        return study_config_from_json(recs.front().at("config"));
    } catch (const ConfigError& e) {
        throw StorageError(std::string("study log meta is invalid: ") + e.what());
    }
}

inline bool has_plan(const std::vector<json>& recs) {
    return std::any_of(recs.begin(), recs.end(), [](const json& r) { return r.value("type", std::string{}) == "seed-plan"; });
}

inline std::vector<Observation> history_of(const Study& st) {
    std::vector<Observation> h;
    for (auto id : st.end_order) {
        const auto& t = st.trials[static_cast<std::size_t>(id)];
        if (t.status == TrialStatus::completed && t.objectives) h.push_back({t.config, *t.objectives, false});
        if (t.status == TrialStatus::pruned && t.objectives) h.push_back({t.config, *t.objectives, true});
    }
    return h;
}

class Runner {
public:
    Runner(Study& st, LogWriter& log, Evaluator& evaluator, int parallelism, const RunOptions& opt)
        : st_(st), log_(log), eval_(evaluator), parallelism_(parallelism), opt_(opt), questions_(st.config.questions()) {
        history_ = history_of(st_);
        snapshot_ = std::make_shared<const ParetoFront>(st_.front);
        for (const auto& t : st_.trials)
            if (t.status == TrialStatus::running || t.reason == "interrupted") retry_.push_back(t.id);
        next_id_ = static_cast<std::int64_t>(st_.trials.size());
    }

    void run() {
        if (parallelism_ == 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (int i = 0; i < parallelism_; ++i) pool.emplace_back([this] { worker(); });
            for (auto& th : pool) th.join();
        }
        if (failure_) std::rethrow_exception(failure_);
    }

private:
    struct Job {
        std::int64_t id;
        int attempt;
        Origin origin;
        std::string label;
        bool baseline;
        FlowConfig config;
    };

    // Coordinator calls; the caller holds mu_.

    std::optional<Job> next_job() {
        if (stop_) return std::nullopt;
        Job j;
        if (!retry_.empty()) {
            const auto& t = st_.trials[static_cast<std::size_t>(retry_.front())];
            retry_.erase(retry_.begin());
            j = {t.id, t.attempt + 1, t.origin, t.label, t.baseline, t.config};
        } else {
            if (next_id_ >= st_.config.max_trials) return std::nullopt;
            const auto id = next_id_++;
            if (static_cast<std::size_t>(id) < st_.plan.size()) {
                const auto& e = st_.plan.entries[static_cast<std::size_t>(id)];
                j = {id, 0, e.origin, e.label, e.baseline, e.config};
            } else {
                Rng rng(hash_combine({st_.config.seed, static_cast<std::uint64_t>(id), hash_string("propose")}));
                j = {id, 0, Origin::sampler, "", false, propose(history_, st_.config.space, st_.config.tpe, rng, st_.config.secondary)};
            }
        }
        json rec = {{"type", "trial-start"}, {"trial", j.id},          {"attempt", j.attempt},
                    {"origin", to_string(j.origin)}, {"label", j.label}, {"baseline", j.baseline},
                    {"config", config_to_json(j.config)}};
        log_.append(rec);
        if (static_cast<std::size_t>(j.id) >= st_.trials.size()) st_.trials.resize(static_cast<std::size_t>(j.id) + 1);
        Trial t;
        t.id = j.id;
        t.attempt = j.attempt;
        t.origin = j.origin;
        t.label = j.label;
        t.baseline = j.baseline;
        t.config = j.config;
        t.started = rec.value("ts", std::string{});
        st_.trials[static_cast<std::size_t>(j.id)] = std::move(t);
        return j;
    }

    void finish(const Job& j, TrialOutcome& out, const std::vector<FrontEntry>& prune_front) {
        auto& t = st_.trials[static_cast<std::size_t>(j.id)];
        if (out.prune) {
            log_.append({{"type", "prune"},
                         {"trial", j.id},
                         {"attempt", j.attempt},
                         {"stats", stats_json(out.prune->stats)},
                         {"corner", {{"c_low", out.prune->corner.c_low}, {"a_high", out.prune->corner.a_high}, {"c_center", out.prune->corner.c_center}}},
                         {"front", front_entries_json(prune_front)}});
            t.prune = out.prune;
            t.prune_front = prune_front;
        }
        json end = {{"type", "trial-end"},
                    {"trial", j.id},
                    {"attempt", j.attempt},
                    {"status", to_string(out.status)},
                    {"objectives", objectives_to_json(out.status == TrialStatus::failed ? std::nullopt : out.objectives)},
                    {"n_evals", out.records.size()}};
        log_.append(end);
        t.status = out.status;
        t.objectives = out.status == TrialStatus::failed ? std::nullopt : out.objectives;
        t.records = std::move(out.records);
        t.ended = end.value("ts", std::string{});
        st_.end_order.push_back(j.id);

        if (t.status == TrialStatus::completed) {
            history_.push_back({t.config, *t.objectives, false});
            if (st_.front.insert({j.id, *t.objectives})) {
                json ids = json::array();
                for (const auto& e : st_.front.entries()) ids.push_back(e.id);
                log_.append({{"type", "front-update"}, {"trial", j.id}, {"front", ids}});
                snapshot_ = std::make_shared<const ParetoFront>(st_.front);
            }
        } else if (t.status == TrialStatus::pruned && t.objectives) {
            history_.push_back({t.config, *t.objectives, true});
        }
        if (opt_.on_trial_end) opt_.on_trial_end(t);
    }

    void worker() {
        try {
            while (true) {
                std::optional<Job> job;
                {
                    std::lock_guard<std::mutex> lock(mu_);
                    job = next_job();
                }
                if (!job) return;
                HarnessOptions h;
                h.pruner = st_.config.pruner;
                h.secondary = st_.config.secondary;
                h.order_seed = hash_combine({st_.config.seed, static_cast<std::uint64_t>(job->id), hash_string("order")});
                FrontSnapshot last_snap;
                h.front = [&] {
                    std::lock_guard<std::mutex> lock(mu_);
                    last_snap = snapshot_;
                    return last_snap;
                };
                h.on_batch = [&](const std::vector<EvalRecord>& batch) {
                    json rs = json::array();
                    for (const auto& r : batch) rs.push_back(record_to_json(r));
                    std::lock_guard<std::mutex> lock(mu_);
                    log_.append({{"type", "eval-batch"}, {"trial", job->id}, {"attempt", job->attempt}, {"records", rs}});
                    st_.total_evaluations += batch.size();
                    auto& t = st_.trials[static_cast<std::size_t>(job->id)];
                    t.records.insert(t.records.end(), batch.begin(), batch.end());
                };
                auto out = evaluate_trial(job->config, job->id, eval_, questions_, h);
                std::vector<FrontEntry> pf;
                if (out.prune && last_snap) pf = last_snap->entries();
                std::lock_guard<std::mutex> lock(mu_);
                finish(*job, out, pf);
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(mu_);
            if (!failure_) failure_ = std::current_exception();
            stop_ = true;
        }
    }

    Study& st_;
    LogWriter& log_;
    Evaluator& eval_;
    int parallelism_;
    const RunOptions& opt_;
    std::vector<std::string> questions_;

    std::mutex mu_;
    std::vector<Observation> history_;
    FrontSnapshot snapshot_;
    std::vector<std::int64_t> retry_;
    std::int64_t next_id_ = 0;
    bool stop_ = false;
    std::exception_ptr failure_;
};

inline void emit_warnings(const RunOptions& opt, const std::vector<std::string>& ws) {
    if (opt.warn)
        for (const auto& w : ws) opt.warn(w);
}

inline Study execute(Study st, LogWriter& log, const RunOptions& opt) {
    std::unique_ptr<Evaluator> owned =
        opt.evaluator_factory ? opt.evaluator_factory(st.config) : make_evaluator(st.config);
    GuardedEvaluator guarded(*owned);
    const int p = opt.parallelism.value_or(st.config.parallelism);
    if (p < 1) throw ConfigError("parallelism must be >= 1");
    Runner(st, log, guarded, p, opt).run();
    return st;
}

} // namespace detail

/// Runs a fresh study; the storage path must not already hold a log.
inline Study run_study(const StudyConfig& cfg, const RunOptions& opt = {}) {
    validate(cfg);
    if (!cfg.storage.empty() && std::filesystem::exists(cfg.storage) && std::filesystem::file_size(cfg.storage) > 0)
        throw StorageError("study log '" + cfg.storage + "' already exists; use resume");
    Study st;
    st.config = cfg;
    st.front = ParetoFront(cfg.secondary);
    LogWriter log(cfg.storage, opt.fault);
    try {
        log.append({{"type", "study-meta"}, {"config", study_config_to_json(cfg)}});
        auto plan = build_seed_plan(cfg);
        st.plan = std::move(plan.plan);
        st.seed_warnings = std::move(plan.warnings);
        detail::emit_warnings(opt, st.seed_warnings);
        log.append(detail::plan_json(st.plan, st.seed_warnings));
        st = detail::execute(std::move(st), log, opt);
    } catch (...) {
        if (opt.memory_log) *opt.memory_log = log.memory();
        throw;
    }
    if (opt.memory_log) *opt.memory_log = log.memory();
    return st;
}

/// Builds study state from log text without modifying anything.
inline Study load_study_text(const std::string& text, LogContents* contents = nullptr) {
    auto lc = parse_log(text);
    Study st;
    st.config = detail::config_from_meta(lc.records);
    st.front = ParetoFront(st.config.secondary);
    st.warnings = lc.warnings;
    detail::replay(st, lc.records);
    if (contents) *contents = std::move(lc);
    return st;
}

inline Study load_study(const std::string& path) { return load_study_text(read_text_file(path)); }

/// Continues a study from its log. `memory_text` resumes a memory-only log
/// (storage path empty); the continued log text goes to opt.memory_log.
inline Study resume_study(const std::string& path, const RunOptions& opt = {}, const std::string* memory_text = nullptr) {
    const std::string text = memory_text ? *memory_text : read_text_file(path);
    LogContents lc;
    Study st = load_study_text(text, &lc);
    detail::emit_warnings(opt, lc.warnings);
    if (!memory_text && lc.truncated_tail) std::filesystem::resize_file(path, lc.valid_bytes);
    st.config.storage = memory_text ? std::string{} : path;

    LogWriter log(st.config.storage, opt.fault);
    if (memory_text) log.preload(text.substr(0, lc.valid_bytes));
    try {
        if (!detail::has_plan(lc.records)) {
            auto plan = build_seed_plan(st.config);
            st.plan = std::move(plan.plan);
            st.seed_warnings = std::move(plan.warnings);
            log.append(detail::plan_json(st.plan, st.seed_warnings));
        }
        // Close interrupted attempts before anything else happens.
        for (auto& t : st.trials) {
            if (t.status != TrialStatus::running) continue;
            log.append({{"type", "trial-end"}, {"trial", t.id}, {"attempt", t.attempt}, {"status", "failed"},
                        {"objectives", nullptr}, {"n_evals", t.records.size()}, {"reason", "interrupted"}});
            ++st.interrupted;
            t.status = TrialStatus::failed;
            t.reason = "interrupted";
            if (opt.warn) opt.warn("trial " + std::to_string(t.id) + " was interrupted; re-running");
        }
        st = detail::execute(std::move(st), log, opt);
    } catch (...) {
        if (opt.memory_log) *opt.memory_log = log.memory();
        throw;
    }
    if (opt.memory_log) *opt.memory_log = log.memory();
    return st;
}

inline PriorStudy prior_from_log(const std::string& path) {
    const auto st = load_study(path);
    PriorStudy out;
    for (const auto& t : st.trials)
        if (t.status == TrialStatus::completed && t.objectives) out.push_back({t.config, *t.objectives});
    return out;
}

} // namespace flowsearch
