// flowsearch: run and inspect flow-configuration searches.
//
// Exit codes: 0 ok, 1 usage or config error, 2 study failure, 3 storage
// corruption.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "flowsearch/flowsearch.hpp"

using namespace flowsearch;

namespace {

constexpr int kUsage = 1, kStudyFailure = 2, kStorage = 3;

struct OutFile {
    explicit OutFile(const std::string& path) {
        if (path.empty() || path == "-") return;
        file.open(path, std::ios::binary | std::ios::trunc);
        if (!file) throw StorageError("cannot write '" + path + "'");
    }
    std::ostream& get() { return file.is_open() ? file : std::cout; }
    std::ofstream file;
};

RunOptions cli_run_options(bool quiet) {
    RunOptions o;
    o.warn = [](const std::string& w) { std::cerr << "warning: " << w << "\n"; };
    if (!quiet) {
        o.on_trial_end = [](const Trial& t) {
            std::cerr << "trial " << t.id << " " << to_string(t.status);
            if (t.objectives) std::cerr << " acc " << t.objectives->accuracy << " cost " << t.objectives->cost;
            std::cerr << "\n";
        };
    }
    return o;
}

std::vector<std::uint64_t> rep_seeds(int n, std::uint64_t first) {
    std::vector<std::uint64_t> s;
    for (int i = 0; i < n; ++i) s.push_back(first + static_cast<std::uint64_t>(i));
    return s;
}

std::pair<double, double> parse_bounds(const std::string& s) {
    const auto comma = s.find(',');
    if (comma == std::string::npos) throw ConfigError("--bounds expects LO,HI");
    try {
        return {std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
    } catch (const std::exception&) {
        throw ConfigError("--bounds expects LO,HI");
    }
}

// Front entries from a study log or an exported front CSV.
std::vector<FrontEntry> front_entries_from(const std::string& path, bool front_only) {
    if (path.ends_with(".csv")) {
        std::ifstream in(path);
        if (!in) throw StorageError("cannot read '" + path + "'");
        std::vector<FrontEntry> out;
        for (const auto& r : read_front_csv(in))
            if (!front_only || r.on_front) out.push_back({r.id, r.objectives});
        return out;
    }
    const auto st = load_study(path);
    if (front_only) return st.front.entries();
    std::vector<FrontEntry> out;
    for (const auto& t : st.trials)
        if (t.status == TrialStatus::completed) out.push_back({t.id, *t.objectives});
    return out;
}

void print_summary(const Study& st) {
    const auto r = make_report(st);
    write_report_text(std::cout, r, true, false);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-objective search over generative-AI flow configurations"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "Run a study from a config file");
    std::string run_cfg, run_storage;
    int run_par = 0, run_trials = 0;
    std::optional<std::uint64_t> run_seed;
    bool quiet = false;
    run->add_option("config", run_cfg, "Study config (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("--storage", run_storage, "Log path (overrides config and environment)");
    run->add_option("--parallelism", run_par, "Concurrent trials")->check(CLI::PositiveNumber);
    run->add_option("--max-trials", run_trials, "Trial budget")->check(CLI::PositiveNumber);
    run->add_option("--seed", run_seed, "Study seed");
    run->add_flag("-q,--quiet", quiet, "No per-trial progress on stderr");

    // resume
    auto* resume = app.add_subcommand("resume", "Continue an interrupted study from its log");
    std::string resume_log;
    int resume_par = 0;
    resume->add_option("log", resume_log, "Study log")->required()->check(CLI::ExistingFile);
    resume->add_option("--parallelism", resume_par, "Concurrent trials")->check(CLI::PositiveNumber);
    resume->add_flag("-q,--quiet", quiet, "No per-trial progress on stderr");

    // report
    auto* report = app.add_subcommand("report", "Trial table, front, and summary metrics");
    std::string report_log, bounds;
    std::optional<std::int64_t> baseline;
    bool as_json = false, per_call = false, front_only = false;
    report->add_option("log", report_log, "Study log")->required()->check(CLI::ExistingFile);
    report->add_option("--baseline", baseline, "Trial id to compare against (default: flagged baseline seed)");
    report->add_option("--bounds", bounds, "pareto_area bounds LO,HI on the secondary objective");
    report->add_flag("--json", as_json, "Machine-readable output");
    report->add_flag("--per-call", per_call, "Show cost per call instead of per 100 calls");
    report->add_flag("--front-only", front_only, "Omit the full trial table");

    // pareto
    auto* pareto = app.add_subcommand("pareto", "Print the Pareto front of a study");
    std::string pareto_log;
    bool pareto_csv = false;
    pareto->add_option("log", pareto_log, "Study log")->required()->check(CLI::ExistingFile);
    pareto->add_flag("--csv", pareto_csv, "Front CSV (completed trials with on_front flags)");

    // seed export / import
    auto* seed = app.add_subcommand("seed", "Seed files");
    seed->require_subcommand(1);
    auto* seed_export = seed->add_subcommand("export", "Write a config's seed plan as a seed file");
    std::string se_cfg, se_out, se_clusters;
    seed_export->add_option("config", se_cfg, "Study config")->required()->check(CLI::ExistingFile);
    seed_export->add_option("-o,--out", se_out, "Seed file (default stdout)");
    seed_export->add_option("--clusters", se_clusters, "Also write the transfer pool with cluster assignments (CSV)");
    auto* seed_import = seed->add_subcommand("import", "Validate a seed file against a space and normalize it");
    std::string si_file, si_space = "builtin:default", si_out;
    seed_import->add_option("file", si_file, "Seed file (one config per line)")->required()->check(CLI::ExistingFile);
    seed_import->add_option("--space", si_space, "Space: builtin:NAME or a JSON file");
    seed_import->add_option("-o,--out", si_out, "Normalized seed file (default stdout)");

    // export-plotdata
    auto* plot = app.add_subcommand("export-plotdata", "CSV plot data");
    std::string plot_kind, plot_input, plot_out;
    std::vector<std::string> plot_priors;
    int plot_reps = 10, plot_n_seeds = 10;
    std::uint64_t plot_first = 0;
    plot->add_option("--kind", plot_kind, "front | ablation | seeding-comparison")->required();
    plot->add_option("input", plot_input, "Study log (front) or study config (ablation, seeding-comparison)")
        ->required()
        ->check(CLI::ExistingFile);
    plot->add_option("-o,--out", plot_out, "CSV path (default stdout)");
    plot->add_option("--reps", plot_reps, "Repetitions")->check(CLI::PositiveNumber);
    plot->add_option("--first-seed", plot_first, "First repetition seed");
    plot->add_option("--prior", plot_priors, "Prior study logs for the transfer arm");
    plot->add_option("--n-seeds", plot_n_seeds, "Seeds per random/transfer arm")->check(CLI::NonNegativeNumber);

    // ablate-pruner
    auto* ablate = app.add_subcommand("ablate-pruner", "Paired pruner on/off studies");
    std::string ab_cfg, ab_out;
    int ab_reps = 10;
    std::uint64_t ab_first = 0;
    ablate->add_option("config", ab_cfg, "Study config (simulated evaluator)")->required()->check(CLI::ExistingFile);
    ablate->add_option("--reps", ab_reps, "Repetitions")->check(CLI::PositiveNumber);
    ablate->add_option("--first-seed", ab_first, "First repetition seed");
    ablate->add_option("-o,--out", ab_out, "Curves CSV");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Run or inspect a builtin desk benchmark");
    std::string sim_bench, sim_front, sim_storage;
    int sim_trials = 200;
    std::uint64_t sim_seed = 0;
    bool sim_info = false, sim_no_pruner = false;
    simulate->add_option("benchmark", sim_bench, "desk-1 | desk-2")->required();
    simulate->add_option("--trials", sim_trials, "Trial budget")->check(CLI::PositiveNumber);
    simulate->add_option("--seed", sim_seed, "Study seed");
    simulate->add_option("--storage", sim_storage, "Log path (default: in memory)");
    simulate->add_option("--true-front", sim_front, "Write the enumerated true front as CSV and exit");
    simulate->add_flag("--info", sim_info, "Print benchmark size and true-front summary and exit");
    simulate->add_flag("--no-pruner", sim_no_pruner, "Evaluate every question");
    simulate->add_flag("-q,--quiet", quiet, "No per-trial progress on stderr");

    // compare
    auto* compare = app.add_subcommand("compare", "Per-entry shift between two fronts matched by trial id");
    std::string cmp_before, cmp_after;
    compare->add_option("before", cmp_before, "Study log or front CSV")->required()->check(CLI::ExistingFile);
    compare->add_option("after", cmp_after, "Study log or front CSV with the same trial ids")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kUsage;
    }

    try {
        if (*run) {
            auto cfg = load_study_config(run_cfg);
            apply_env_overrides(cfg);
            if (!run_storage.empty()) cfg.storage = run_storage;
            if (run_par) cfg.parallelism = run_par;
            if (run_trials) cfg.max_trials = run_trials;
            if (run_seed) cfg.seed = *run_seed;
            if (cfg.storage.empty()) throw ConfigError("run needs a storage path");
            print_summary(run_study(cfg, cli_run_options(quiet)));
            std::cout << "log " << cfg.storage << "\n";
        } else if (*resume) {
            auto opt = cli_run_options(quiet);
            if (resume_par) opt.parallelism = resume_par;
            print_summary(resume_study(resume_log, opt));
        } else if (*report) {
            const auto st = load_study(report_log);
            for (const auto& w : st.warnings) std::cerr << "warning: " << w << "\n";
            ReportOptions ro;
            ro.baseline = baseline;
            if (!bounds.empty()) ro.bounds = parse_bounds(bounds);
            const auto r = make_report(st, ro);
            if (as_json) std::cout << report_to_json(r).dump(2) << "\n";
            else write_report_text(std::cout, r, !per_call, !front_only);
        } else if (*pareto) {
            const auto st = load_study(pareto_log);
            if (pareto_csv) {
                write_front_csv(std::cout, st);
            } else {
                const auto r = make_report(st);
                detail::write_table(std::cout, r.front, true);
            }
        } else if (*seed_export) {
            const auto cfg = load_study_config(se_cfg);
            const auto plan = build_seed_plan(cfg);
            for (const auto& w : plan.warnings) std::cerr << "warning: " << w << "\n";
            std::vector<FlowConfig> seeds;
            for (const auto& e : plan.plan.entries) seeds.push_back(e.config);
            OutFile out(se_out);
            write_seed_file(out.get(), seeds);
            if (!se_clusters.empty()) {
                if (!cfg.seeding.transfer) throw ConfigError("--clusters needs transfer seeding in the config");
                std::vector<PriorStudy> priors;
                for (const auto& p : cfg.seeding.transfer->priors) priors.push_back(prior_from_log(p));
                Rng rng(hash_combine({cfg.seed, hash_string("transfer")}));
                const auto tr = transfer_seeds(priors, cfg.space, cfg.seeding.transfer->k_fronts,
                                               static_cast<std::size_t>(cfg.seeding.transfer->n_select), rng, cfg.secondary);
                OutFile cl(se_clusters);
                write_cluster_csv(cl.get(), tr);
            }
            std::cerr << seeds.size() << " seeds\n";
        } else if (*seed_import) {
            const auto space = detail::space_from_ref(json(si_space), std::filesystem::current_path());
            std::ifstream in(si_file);
            const auto seeds = read_seed_file(in, space);
            OutFile out(si_out);
            write_seed_file(out.get(), seeds);
            std::cerr << seeds.size() << " seeds valid\n";
        } else if (*plot) {
            OutFile out(plot_out);
            if (plot_kind == "front") {
                write_front_csv(out.get(), load_study(plot_input));
            } else if (plot_kind == "ablation") {
                write_ablation_csv(out.get(), ablate_pruner(load_study_config(plot_input), rep_seeds(plot_reps, plot_first)));
            } else if (plot_kind == "seeding-comparison") {
                SeedingComparisonOptions so;
                so.priors = plot_priors;
                so.n_seeds = static_cast<std::size_t>(plot_n_seeds);
                std::vector<SeedingArm> arms = {SeedingArm::random, SeedingArm::static_};
                if (!plot_priors.empty()) arms.push_back(SeedingArm::transfer);
                else std::cerr << "warning: no --prior given; transfer arm omitted\n";
                write_seeding_csv(out.get(), compare_seeding(load_study_config(plot_input), rep_seeds(plot_reps, plot_first), so, arms));
            } else {
                throw ConfigError("unsupported plot-data kind '" + plot_kind + "' (front, ablation, seeding-comparison)");
            }
        } else if (*ablate) {
            const auto a = ablate_pruner(load_study_config(ab_cfg), rep_seeds(ab_reps, ab_first));
            std::cout << "rep  seed  evals(pruner)  evals(off)  area(pruner)  area(off)\n";
            for (std::size_t i = 0; i < a.reps.size(); ++i) {
                const auto& r = a.reps[i];
                std::cout << i << "  " << r.seed << "  " << r.on.final_evaluations() << "  " << r.off.final_evaluations() << "  "
                          << r.on.final_area() << "  " << r.off.final_area() << "\n";
            }
            std::cout << "median evaluation savings " << a.median_eval_savings << "\n"
                      << "median area ratio (pruner/off) " << a.median_area_ratio << "\n";
            if (!ab_out.empty()) {
                OutFile out(ab_out);
                write_ablation_csv(out.get(), a);
            }
        } else if (*simulate) {
            const auto spec = builtin_benchmark(sim_bench);
            if (!sim_front.empty() || sim_info) {
                const auto tf = true_front(spec);
                if (!sim_front.empty()) {
                    OutFile out(sim_front);
                    write_true_front_csv(out.get(), tf);
                }
                if (sim_info) {
                    std::cout << "benchmark " << spec.name << "\nconfigs " << tf.configs.size() << "\ncardinality_log10 "
                              << cardinality_log10(spec.space) << "\ntrue front " << tf.front.size() << " entries\ncost span ["
                              << tf.min_secondary << ", " << tf.max_secondary << "]\ntrue pareto_area "
                              << pareto_area(tf.front, tf.min_secondary, tf.max_secondary) << "\n";
                }
                return 0;
            }
            StudyConfig cfg;
            cfg.name = spec.name;
            cfg.space = spec.space;
            cfg.evaluator = SimulatedBinding{spec};
            cfg.max_trials = sim_trials;
            cfg.seed = sim_seed;
            cfg.storage = sim_storage;
            if (sim_no_pruner) cfg.pruner.reset();
            // Seeds take at most half the budget.
            const int n_static = static_cast<int>(static_seeds(spec.space).seeds.size());
            if (n_static > sim_trials) cfg.seeding.use_static = false;
            cfg.seeding.random = std::clamp(sim_trials / 2 - (cfg.seeding.use_static ? n_static : 0), 0, cfg.seeding.random);
            const auto st = run_study(cfg, cli_run_options(quiet));
            print_summary(st);
            std::vector<FlowConfig> done;
            for (const auto& t : st.trials)
                if (t.status == TrialStatus::completed) done.push_back(t.config);
            std::cout << "true-objective area ratio " << AreaOracle(spec).ratio(done) << "\n";
        } else if (*compare) {
            const auto before = front_entries_from(cmp_before, true);
            std::vector<FrontEntry> after;
            for (const auto& e : front_entries_from(cmp_after, false))
                if (std::any_of(before.begin(), before.end(), [&](const FrontEntry& b) { return b.id == e.id; })) after.push_back(e);
            const auto fs = front_shift(before, after);
            std::cout << "id  accuracy_delta_pp  cost_multiplier\n";
            for (const auto& r : fs.rows) std::cout << r.id << "  " << r.accuracy_delta_pp << "  " << r.cost_multiplier << "\n";
            std::cout << "mean  " << fs.mean_accuracy_delta_pp << "  " << fs.mean_cost_multiplier << "\n";
        }
    } catch (const StorageError& e) {
        std::cerr << "storage error: " << e.what() << "\n";
        return kStorage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "study failed: " << e.what() << "\n";
        return kStudyFailure;
    }
    return 0;
}
