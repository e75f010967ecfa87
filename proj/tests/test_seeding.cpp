#include <gtest/gtest.h>

#include <sstream>

#include "flowsearch/default_space.hpp"
#include "flowsearch/seeding.hpp"
#include "flowsearch/space_io.hpp"
#include "test_util.hpp"

using namespace flowsearch;

namespace {

ObjectiveVector ov(double acc, double cost) { return {acc, cost, std::nullopt}; }

SearchSpace without_prefix(const SearchSpace& s, const std::string& prefix) {
    auto j = space_to_json(s);
    json params = json::array(), rules = json::array();
    for (const auto& p : j["params"])
        if (p["name"].get<std::string>().rfind(prefix, 0) != 0) params.push_back(p);
    for (const auto& r : j["rules"])
        if (r["child"].get<std::string>().rfind(prefix, 0) != 0 && r["parent"].get<std::string>().rfind(prefix, 0) != 0)
            rules.push_back(r);
    j["params"] = params;
    j["rules"] = rules;
    return space_from_json(j);
}

// One categorical with far-apart values and a fine integer: configs sharing
// the categorical value sit within 1/10 of each other, others ~sqrt(2) apart.
SearchSpace cluster_space() {
    return SearchSpace({{"kind", Categorical{{"a", "b", "c", "d"}}, {}, std::nullopt}, {"n", Integer{0, 10, 1}, {}, std::nullopt}}, {},
                       "kind");
}

FlowConfig kc(const std::string& kind, std::int64_t n) { return FlowConfig({{"kind", kind}, {"n", n}}); }

// Depth by repeated peeling with an O(n^2) dominance scan.
std::vector<int> peel_depths(const std::vector<ObjectiveVector>& pts) {
    std::vector<int> depth(pts.size(), 0);
    for (int d = 1;; ++d) {
        std::vector<std::size_t> layer;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (depth[i]) continue;
            bool dom = false;
            for (std::size_t j = 0; j < pts.size() && !dom; ++j)
                dom = !depth[j] && j != i && dominates(pts[j], pts[i]);
            if (!dom) layer.push_back(i);
        }
        if (layer.empty()) break;
        for (auto i : layer) depth[i] = d;
    }
    return depth;
}

} // namespace

TEST(StaticSeeds, DefaultSpaceYields46) {
    const auto space = default_space();
    const auto s = static_seeds(space);
    EXPECT_EQ(s.seeds.size(), 46u);
    EXPECT_TRUE(s.warnings.empty());
    int baselines = 0;
    for (const auto& e : s.seeds) {
        EXPECT_TRUE(check_config(space, e.config).ok()) << e.label;
        EXPECT_EQ(e.origin, Origin::static_seed);
        baselines += e.baseline;
    }
    EXPECT_EQ(baselines, 1);
}

TEST(StaticSeeds, OrderIsDeterministic) {
    const auto a = static_seeds(default_space()), b = static_seeds(default_space());
    ASSERT_EQ(a.seeds.size(), b.seeds.size());
    for (std::size_t i = 0; i < a.seeds.size(); ++i) {
        EXPECT_EQ(a.seeds[i].config, b.seeds[i].config);
        EXPECT_EQ(a.seeds[i].label, b.seeds[i].label);
    }
}

TEST(StaticSeeds, MissingFewShotRowsAreSkippedAndReported) {
    const auto full = default_space();
    const auto space = without_prefix(full, "few_shot");
    ASSERT_EQ(space.find("few_shot_enabled"), nullptr);
    const auto s = static_seeds(space);
    const auto n_llm = full.param("llm").values().size();
    EXPECT_EQ(s.seeds.size(), 46u - n_llm);
    EXPECT_EQ(s.warnings.size(), n_llm);
    for (const auto& w : s.warnings) EXPECT_NE(w.find("dense-few-shot"), std::string::npos) << w;
    for (const auto& e : s.seeds) EXPECT_TRUE(check_config(space, e.config).ok());
}

TEST(RandomSeeds, CountAndDeterminism) {
    const auto space = default_space();
    Rng r0(1);
    EXPECT_TRUE(random_seeds(space, 0, r0).empty());
    Rng a(99), b(99);
    const auto x = random_seeds(space, 100, a), y = random_seeds(space, 100, b);
    EXPECT_EQ(x, y);
    EXPECT_EQ(x.size(), 100u);
    for (const auto& c : x) EXPECT_TRUE(check_config(space, c).ok());
}

TEST(TransferSeeds, TwoTightClustersGiveOneEach) {
    const auto space = cluster_space();
    PriorStudy prior;
    // All mutually nondominated so depth does not decide membership.
    const std::vector<FlowConfig> cfgs = {kc("a", 3), kc("a", 4), kc("a", 5), kc("d", 6), kc("d", 7), kc("d", 8)};
    for (std::size_t i = 0; i < cfgs.size(); ++i) prior.push_back({cfgs[i], ov(0.3 + 0.1 * i, 1.0 + i)});

    double intra = 0.0, inter = 1e9;
    for (std::size_t i = 0; i < cfgs.size(); ++i)
        for (std::size_t j = i + 1; j < cfgs.size(); ++j) {
            const double d = detail::sq_dist(encode(space, cfgs[i]), encode(space, cfgs[j]));
            const bool same = std::get<std::string>(cfgs[i].at("kind")) == std::get<std::string>(cfgs[j].at("kind"));
            if (same) intra = std::max(intra, d);
            else inter = std::min(inter, d);
        }
    ASSERT_LT(intra * 10, inter);

    Rng rng(5);
    const auto r = transfer_seeds({prior}, space, 1, 2, rng);
    ASSERT_EQ(r.seeds.size(), 2u);
    std::set<std::string> kinds;
    for (const auto& c : r.seeds) kinds.insert(std::get<std::string>(c.at("kind")));
    EXPECT_EQ(kinds, (std::set<std::string>{"a", "d"}));
    // Within each cluster the highest-accuracy member wins.
    EXPECT_EQ(r.seeds[0], kc("d", 8));
    EXPECT_EQ(r.seeds[1], kc("a", 5));
}

TEST(TransferSeeds, DistantPoolIsReturnedWhole) {
    const auto space = cluster_space();
    PriorStudy prior = {{kc("a", 0), ov(0.2, 1)}, {kc("b", 10), ov(0.4, 2)}, {kc("c", 0), ov(0.6, 3)}, {kc("d", 10), ov(0.8, 4)}};
    Rng rng(11);
    const auto r = transfer_seeds({prior}, space, 1, 4, rng);
    EXPECT_EQ(std::set<FlowConfig>(r.seeds.begin(), r.seeds.end()),
              (std::set<FlowConfig>{kc("a", 0), kc("b", 10), kc("c", 0), kc("d", 10)}));
}

TEST(TransferSeeds, NeverTwoFromOneCluster) {
    const auto space = default_space();
    Rng gen(3);
    PriorStudy a, b;
    for (int i = 0; i < 60; ++i) {
        a.push_back({sample_random(space, gen), ov(gen.uniform(), gen.uniform(0.001, 0.1))});
        b.push_back({sample_random(space, gen), ov(gen.uniform(), gen.uniform(0.001, 0.1))});
    }
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed);
        const auto r = transfer_seeds({a, b}, space, 3, 8, rng);
        EXPECT_LE(r.seeds.size(), 8u);
        std::set<int> clusters;
        int selected = 0;
        for (const auto& m : r.pool) {
            if (!m.selected) continue;
            ++selected;
            EXPECT_TRUE(clusters.insert(m.cluster).second) << "cluster " << m.cluster << " chosen twice";
        }
        EXPECT_EQ(selected, static_cast<int>(r.seeds.size()));
        for (const auto& c : r.seeds) EXPECT_TRUE(check_config(space, c).ok());
    }
}

TEST(TransferSeeds, DeterministicGivenSeedAndOrder) {
    const auto space = default_space();
    Rng gen(8);
    PriorStudy a;
    for (int i = 0; i < 80; ++i) a.push_back({sample_random(space, gen), ov(gen.uniform(), gen.uniform(0.001, 0.1))});
    Rng r1(42), r2(42);
    EXPECT_EQ(transfer_seeds({a}, space, 2, 6, r1).seeds, transfer_seeds({a}, space, 2, 6, r2).seeds);
}

TEST(TransferSeeds, DepthsMatchPeelingOracle) {
    const auto space = cluster_space();
    Rng gen(21);
    for (int rep = 0; rep < 20; ++rep) {
        PriorStudy prior;
        std::vector<ObjectiveVector> pts;
        for (int i = 0; i < 40; ++i) {
            auto o = ov(std::round(gen.uniform() * 10) / 10, std::round(gen.uniform(1, 5) * 4) / 4);
            prior.push_back({kc(std::string(1, static_cast<char>('a' + i % 4)), i % 11), o});
            pts.push_back(o);
        }
        const auto depth = peel_depths(pts);
        Rng rng(rep);
        const auto r = transfer_seeds({prior}, space, 1000, 0, rng);
        ASSERT_EQ(r.pool.size(), prior.size());
        for (std::size_t i = 0; i < prior.size(); ++i) EXPECT_EQ(r.pool[i].depth, depth[i]) << "point " << i;
    }
}

TEST(TransferSeeds, KFrontsLimitsPool) {
    const auto space = cluster_space();
    // Three nested fronts.
    PriorStudy prior = {{kc("a", 1), ov(0.9, 1)}, {kc("a", 2), ov(0.8, 2)}, {kc("b", 3), ov(0.7, 3)}};
    Rng rng(1);
    const auto r = transfer_seeds({prior}, space, 2, 5, rng);
    ASSERT_EQ(r.pool.size(), 2u);
    EXPECT_EQ(r.pool[0].depth, 1);
    EXPECT_EQ(r.pool[1].depth, 2);
}

TEST(TransferSeeds, IncompatibleDroppedAndEmptyPoolThrows) {
    const auto space = cluster_space();
    PriorStudy prior = {{FlowConfig({{"kind", std::string("z")}, {"n", std::int64_t{1}}}), ov(0.9, 1)},
                        {FlowConfig({{"kind", std::string("a")}, {"n", std::int64_t{1}}, {"extra", std::string("x")}}), ov(0.8, 1)}};
    Rng rng(1);
    EXPECT_THROW(transfer_seeds({prior}, space, 1, 2, rng), std::invalid_argument);
    prior.push_back({kc("b", 2), ov(0.5, 0.5)});
    const auto r = transfer_seeds({prior}, space, 2, 2, rng);
    EXPECT_EQ(r.warnings.size(), 2u);
    EXPECT_EQ(r.seeds, std::vector<FlowConfig>{kc("b", 2)});
}

TEST(SeedFile, RoundTrip) {
    const auto space = default_space();
    Rng gen(4);
    const auto seeds = random_seeds(space, 25, gen);
    std::stringstream ss;
    write_seed_file(ss, seeds);
    EXPECT_EQ(read_seed_file(ss, space), seeds);
}

TEST(SeedFile, BadLineReportsLineNumber) {
    std::stringstream ss("{\"kind\":\"a\",\"n\":1}\n\n{\"kind\":\"q\",\"n\":1}\n");
    try {
        read_seed_file(ss, cluster_space());
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}
