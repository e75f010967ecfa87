#include <gtest/gtest.h>

#include <sstream>

#include "flowsearch/report.hpp"
#include "test_util.hpp"

using namespace flowsearch;

namespace {

StudyConfig desk_config(std::uint64_t seed, int trials) {
    StudyConfig c;
    c.space = desk1_space();
    c.evaluator = SimulatedBinding{desk1()};
    c.seeding.random = 10;
    c.max_trials = trials;
    c.seed = seed;
    c.storage = "";
    return c;
}

Trial trial(std::int64_t id, double acc, double cost, bool baseline = false) {
    Trial t;
    t.id = id;
    t.status = TrialStatus::completed;
    t.objectives = ObjectiveVector{acc, cost, 1.0};
    t.baseline = baseline;
    t.config = FlowConfig({{"flow", std::string("rag")}, {"llm", std::string("o3-mini")}});
    return t;
}

Study hand_study(std::vector<Trial> ts) {
    Study st;
    st.config = desk_config(0, 10);
    for (auto& t : ts) {
        st.front.insert({t.id, *t.objectives});
        st.trials.push_back(std::move(t));
    }
    return st;
}

} // namespace

TEST(Report, ThreeTrialsTwoOnFront) {
    const auto st = hand_study({trial(0, 0.6, 0.002), trial(1, 0.8, 0.004), trial(2, 0.5, 0.003)});
    const auto r = make_report(st);
    EXPECT_EQ(r.rows.size(), 3u);
    ASSERT_EQ(r.front.size(), 2u);
    EXPECT_EQ(r.front[0].id, 0);
    EXPECT_EQ(r.front[1].id, 1);
    EXPECT_EQ(r.rows[1].id, 2);
    EXPECT_DOUBLE_EQ(r.rows[0].cost_per_100, 0.2);
}

TEST(Report, BaselineOnFrontGivesZeroGains) {
    const auto st = hand_study({trial(0, 0.6, 0.002, true), trial(1, 0.8, 0.004)});
    const auto r = make_report(st);
    ASSERT_TRUE(r.gains);
    EXPECT_EQ(*r.baseline, 0);
    EXPECT_EQ(r.gains->accuracy_delta, 0.0);
    EXPECT_EQ(r.gains->cost_reduction, 0.0);
}

TEST(Report, NamedAndUnknownBaseline) {
    const auto st = hand_study({trial(0, 0.6, 0.002), trial(1, 0.55, 0.004)});
    EXPECT_FALSE(make_report(st).gains);
    ReportOptions o;
    o.baseline = 1;
    const auto r = make_report(st, o);
    EXPECT_NEAR(r.gains->accuracy_delta, 0.05, 1e-12);
    EXPECT_NEAR(*r.gains->cost_reduction, 0.5, 1e-12);
    o.baseline = 7;
    EXPECT_THROW(make_report(st, o), ConfigError);
}

TEST(Report, MetricsUseRequestedBounds) {
    const auto st = hand_study({trial(0, 1.0, 0.001)});
    ReportOptions o;
    o.bounds = {{0.001, 0.1}};
    const auto r = make_report(st, o);
    EXPECT_DOUBLE_EQ(r.pareto_area, 1.0);
    EXPECT_DOUBLE_EQ(r.hypervolume, 1.0 * (0.1 - 0.001));
}

TEST(Report, RowsSortedAndFrontNondominated) {
    const auto st = run_study(desk_config(4, 60));
    const auto r = make_report(st);
    for (std::size_t i = 1; i < r.rows.size(); ++i) EXPECT_LE(r.rows[i - 1].cost, r.rows[i].cost);
    for (const auto& a : r.front)
        for (const auto& b : r.front)
            EXPECT_FALSE(dominates({a.accuracy, a.cost, std::nullopt}, {b.accuracy, b.cost, std::nullopt}));
    EXPECT_EQ(r.front.size(), st.front.size());
}

TEST(Report, PrunerSummaryCountsSkippedQuestions) {
    const auto st = run_study(desk_config(5, 60));
    const auto r = make_report(st);
    std::size_t saved = 0;
    for (const auto& t : st.trials)
        if (t.status == TrialStatus::pruned) saved += 100 - t.records.size();
    EXPECT_EQ(r.pruner.pruned, st.count(TrialStatus::pruned));
    EXPECT_EQ(r.pruner.evaluations_saved, saved);
    EXPECT_EQ(r.pruner.evaluations, st.evaluations());
    EXPECT_GT(saved, 0u);
}

TEST(Report, ComponentSummary) {
    const FlowConfig c({{"llm", std::string("o3-mini")},
                        {"retriever", std::string("fusion")},
                        {"hyde_enabled", std::string("true")},
                        {"reranker_enabled", std::string("false")}});
    EXPECT_EQ(component_summary(c), "llm=o3-mini retriever=fusion +hyde");
}

TEST(FrontCsv, ReimportRecomputesIdenticalFront) {
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto st = run_study(desk_config(seed, 60));
        std::stringstream a, b;
        write_front_csv(a, st);
        write_front_csv(b, st);
        EXPECT_EQ(a.str(), b.str());
        const auto rows = read_front_csv(a);
        EXPECT_EQ(rows.size(), st.count(TrialStatus::completed));
        EXPECT_EQ(front_from_csv_rows(rows).entries().size(), st.front.entries().size());
        const auto re = front_from_csv_rows(rows).entries();
        for (std::size_t i = 0; i < re.size(); ++i) {
            EXPECT_EQ(re[i].id, st.front.entries()[i].id);
            EXPECT_EQ(re[i].objectives.accuracy, st.front.entries()[i].objectives.accuracy);
            EXPECT_EQ(re[i].objectives.cost, st.front.entries()[i].objectives.cost);
        }
        for (const auto& r : rows) EXPECT_EQ(r.on_front, st.front.contains(r.id));
    }
}

TEST(FrontCsv, Header) {
    std::stringstream s;
    write_front_csv(s, hand_study({trial(0, 0.5, 0.01)}));
    std::string line;
    std::getline(s, line);
    EXPECT_EQ(line, "trial_id,accuracy,cost_usd,log10_cost,on_front,flow,llm");
    std::getline(s, line);
    EXPECT_EQ(line, "0,0.5,0.01,-2,1,rag,o3-mini");
    std::stringstream bad("trial_id,accuracy\n");
    EXPECT_THROW(read_front_csv(bad), ConfigError);
}

TEST(AreaOracle, EnumerationScoresOneAndEmptyZero) {
    const auto spec = desk1();
    const AreaOracle o(spec);
    EXPECT_DOUBLE_EQ(o.ratio(enumerate_space(spec.space)), 1.0);
    EXPECT_EQ(o.area({}), 0.0);
    EXPECT_GT(o.true_area(), 0.0);
    EXPECT_LE(o.true_area(), 1.0);
}

TEST(Ablation, InfiniteZMakesArmsIdentical) {
    auto c = desk_config(0, 40);
    c.pruner = PrunerConfig{};
    c.pruner->z = 1e9;
    const auto a = ablate_pruner(c, {3, 4});
    ASSERT_EQ(a.reps.size(), 2u);
    for (const auto& r : a.reps) {
        EXPECT_EQ(r.on.evaluations, r.off.evaluations);
        EXPECT_EQ(r.on.area, r.off.area);
        EXPECT_EQ(r.on.area.size(), 40u);
    }
    EXPECT_EQ(a.median_eval_savings, 0.0);
    EXPECT_EQ(a.median_area_ratio, 1.0);
}

TEST(Ablation, CsvPairsArmsBySeed) {
    const auto a = ablate_pruner(desk_config(0, 35), {7, 9});
    std::stringstream s;
    write_ablation_csv(s, a);
    std::vector<std::string> row;
    ASSERT_TRUE(csv::read_row(s, row));
    EXPECT_EQ(row, (std::vector<std::string>{"rep", "seed", "arm", "trials", "evaluations", "spend_usd", "area_ratio"}));
    std::map<std::string, std::set<std::string>> arms_by_seed;
    std::size_t n = 0;
    while (csv::read_row(s, row)) {
        arms_by_seed[row[1]].insert(row[2]);
        ++n;
    }
    EXPECT_EQ(n, 2u * 2u * 35u);
    ASSERT_EQ(arms_by_seed.size(), 2u);
    for (const auto& [seed, arms] : arms_by_seed) EXPECT_EQ(arms, (std::set<std::string>{"pruner", "no-pruner"}));
    for (const auto& r : a.reps) EXPECT_LE(r.on.final_evaluations(), r.off.final_evaluations());
}

TEST(SeedingComparison, ThreeArms) {
    const auto dir = testutil::temp_dir("seedcmp");
    auto prior = desk_config(50, 40);
    prior.storage = (dir / "prior.jsonl").string();
    run_study(prior);

    auto c = desk_config(0, 30);
    c.pruner.reset();
    SeedingComparisonOptions o;
    o.priors = {prior.storage};
    o.n_seeds = 5;
    const auto s = compare_seeding(c, {1, 2}, o);
    ASSERT_EQ(s.runs.size(), 6u);
    std::stringstream out;
    write_seeding_csv(out, s);
    std::vector<std::string> row;
    csv::read_row(out, row);
    EXPECT_EQ(row, (std::vector<std::string>{"arm", "rep", "seed", "trials", "evaluations", "area_ratio"}));
    std::set<std::string> arms;
    while (csv::read_row(out, row)) arms.insert(row[0]);
    EXPECT_EQ(arms, (std::set<std::string>{"random", "static", "transfer"}));
    for (const auto& r : s.runs) {
        for (std::size_t i = 1; i < r.curve.area.size(); ++i) EXPECT_GE(r.curve.area[i], r.curve.area[i - 1]);
    }
    o.priors.clear();
    EXPECT_THROW(compare_seeding(c, {1}, o), ConfigError);
}

TEST(SeedingComparison, TrialsToThreshold) {
    ArmCurve c;
    c.area = {0.1, 0.5, 0.79, 0.81, 0.9};
    EXPECT_EQ(c.trials_to(0.8), 4);
    EXPECT_EQ(c.trials_to(0.95), std::nullopt);
    EXPECT_EQ(c.trials_to(0.0), 1);
}
