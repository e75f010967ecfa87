#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "flowsearch/default_space.hpp"
#include "flowsearch/space.hpp"
#include "flowsearch/space_io.hpp"
#include "test_util.hpp"

using namespace flowsearch;

namespace {

SearchSpace small_space() {
    return SearchSpace({{"root", Categorical{{"A", "B"}}, {}, std::nullopt},
                        {"x", Categorical{{"1", "2", "3"}}, {}, std::nullopt},
                        {"y", Categorical{{"1", "2", "3"}}, {}, std::nullopt},
                        {"z", Categorical{{"1", "2", "3", "4"}}, {}, std::nullopt}},
                       {{"x", "root", {"A"}}, {"y", "root", {"A"}}, {"z", "root", {"B"}}}, "root");
}

FlowConfig cfg(std::map<std::string, Value> m) { return FlowConfig(std::move(m)); }

} // namespace

TEST(Validate, WellFormedSpaceHasEmptyReport) {
    SearchSpace s({{"flow", Categorical{{"a", "b"}}, {}, std::nullopt},
                   {"k", Integer{1, 5, 1}, {}, std::nullopt},
                   {"t", Real{0.1, 1.0, true, 64}, {}, std::nullopt}},
                  {{"k", "flow", {"a"}}}, "flow");
    EXPECT_TRUE(validate(s).ok()) << validate(s).summary();
}

TEST(Validate, RealParentIsRejected) {
    SearchSpace s({{"flow", Categorical{{"a"}}, {}, std::nullopt},
                   {"t", Real{0.0, 1.0, false, 64}, {}, std::nullopt},
                   {"k", Integer{1, 5, 1}, {}, std::nullopt}},
                  {{"k", "t", {"0.5"}}}, "flow");
    EXPECT_TRUE(validate(s).mentions("parent not categorical"));
}

TEST(Validate, CycleIsRejected) {
    SearchSpace s({{"flow", Categorical{{"x"}}, {}, std::nullopt},
                   {"a", Categorical{{"on", "off"}}, {}, std::nullopt},
                   {"b", Categorical{{"on", "off"}}, {}, std::nullopt}},
                  {{"b", "a", {"on"}}, {"a", "b", {"on"}}}, "flow");
    EXPECT_FALSE(s.acyclic());
    EXPECT_TRUE(validate(s).mentions("cyclic activation"));
}

TEST(Validate, ParamInvariants) {
    SearchSpace s({{"flow", Integer{0, 3, 1}, {}, std::nullopt},
                   {"c", Categorical{{"a", "a"}}, {}, std::nullopt},
                   {"e", Categorical{{}}, {}, std::nullopt},
                   {"i", Integer{5, 5, 0}, {}, std::nullopt},
                   {"r", Real{0.0, 1.0, true, 64}, {}, std::nullopt},
                   {"c", Categorical{{"x"}}, {}, std::nullopt}},
                  {{"c", "e", {"nope"}}, {"ghost", "c", {"a"}}, {"i", "i", {"a"}}}, "flow");
    const auto rep = validate(s);
    EXPECT_TRUE(rep.mentions("root not categorical"));
    EXPECT_TRUE(rep.mentions("duplicate categorical value"));
    EXPECT_TRUE(rep.mentions("categorical value list is empty"));
    EXPECT_TRUE(rep.mentions("lo < hi"));
    EXPECT_TRUE(rep.mentions("step must be positive"));
    EXPECT_TRUE(rep.mentions("log-scale range requires lo > 0"));
    EXPECT_TRUE(rep.mentions("duplicate parameter name"));
    EXPECT_TRUE(rep.mentions("not in parent domain"));
    EXPECT_TRUE(rep.mentions("undeclared child"));
    EXPECT_TRUE(rep.mentions("child equals parent"));
}

TEST(Validate, DefaultSpaceIsValid) {
    const auto s = default_space();
    EXPECT_TRUE(validate(s).ok()) << validate(s).summary();
}

TEST(ActiveParams, SparseRetrieverDropsEmbedding) {
    const auto s = default_space();
    auto act = active_params(s, cfg({{"flow", "rag"}, {"retriever", "sparse"}}));
    EXPECT_FALSE(act.count("embedding"));
    EXPECT_FALSE(act.count("fusion_num_queries"));
    act = active_params(s, cfg({{"flow", "rag"}, {"retriever", "dense"}}));
    EXPECT_TRUE(act.count("embedding"));
}

TEST(ActiveParams, FusionActivatesItsKnobs) {
    const auto act = active_params(default_space(), cfg({{"flow", "rag"}, {"retriever", "fusion"}}));
    EXPECT_TRUE(act.count("fusion_num_queries"));
    EXPECT_TRUE(act.count("fusion_mode"));
    EXPECT_TRUE(act.count("fusion_bm25_weight_pct"));
}

TEST(ActiveParams, EmptyRuleSetActivatesEverything) {
    SearchSpace s({{"r", Categorical{{"a"}}, {}, std::nullopt}, {"k", Integer{0, 4, 2}, {}, std::nullopt}}, {}, "r");
    EXPECT_EQ(active_params(s, cfg({{"r", "a"}})), (std::set<std::string>{"r", "k"}));
}

TEST(ActiveParams, UnknownNameThrows) {
    EXPECT_THROW(active_params(small_space(), cfg({{"root", "A"}, {"nope", "1"}})), ConfigError);
}

TEST(ActiveParams, AgentPlaceholdersFollowFlow) {
    const auto act = active_params(default_space(), cfg({{"flow", "react_rag_agent"}}));
    EXPECT_TRUE(act.count("react_llm"));
    EXPECT_TRUE(act.count("react_max_steps"));
    EXPECT_FALSE(act.count("lats_llm"));
}

TEST(ActiveParams, OrderIndependentFixedPoint) {
    // The library propagates in topological order; the oracle iterates rules to a fixed point.
    Rng rng(5);
    for (int rep = 0; rep < 50; ++rep) {
        const auto s = testutil::random_space(rng, 7);
        for (const auto& c : testutil::enumerate_configs(s)) {
            auto act = active_params(s, c);
            std::set<std::string> assigned;
            for (const auto& [k, _] : c.assignments()) assigned.insert(k);
            EXPECT_EQ(act, assigned);
        }
    }
}

TEST(SampleRandom, SameSeedSameConfig) {
    const auto s = default_space();
    Rng a(77), b(77);
    EXPECT_EQ(sample_random(s, a), sample_random(s, b));
}

TEST(SampleRandom, LogUniformChunkSizeInRange) {
    const auto s = default_space();
    Rng rng(3);
    for (int i = 0; i < 2000; ++i) {
        const auto c = sample_random(s, rng);
        const double x = std::get<double>(c.at("chunk_size"));
        EXPECT_GE(x, 256.0);
        EXPECT_LE(x, 4096.0);
    }
}

TEST(SampleRandom, TwoValueRootIsBalanced) {
    SearchSpace s({{"r", Categorical{{"a", "b"}}, {}, std::nullopt}}, {}, "r");
    Rng rng(11);
    int a = 0;
    for (int i = 0; i < 10000; ++i) a += sample_random(s, rng).get_string("r") == "a";
    EXPECT_GE(a / 10000.0, 0.47);
    EXPECT_LE(a / 10000.0, 0.53);
}

TEST(SampleRandom, AlwaysValidWithExactlyActiveParams) {
    Rng rng(21);
    const auto def = default_space();
    for (int i = 0; i < 500; ++i) {
        const auto c = sample_random(def, rng);
        EXPECT_TRUE(check_config(def, c).ok()) << check_config(def, c).summary();
    }
    for (int rep = 0; rep < 100; ++rep) {
        const auto s = testutil::random_space(rng, 9);
        for (int i = 0; i < 20; ++i) {
            const auto c = sample_random(s, rng);
            ASSERT_TRUE(check_config(s, c).ok()) << check_config(s, c).summary();
            std::set<std::string> assigned;
            for (const auto& [k, _] : c.assignments()) assigned.insert(k);
            EXPECT_EQ(assigned, active_params(s, c));
        }
    }
}

TEST(CheckConfig, FlagsMissingAndExtra) {
    const auto s = small_space();
    EXPECT_TRUE(check_config(s, cfg({{"root", "A"}, {"x", "1"}, {"y", "2"}})).ok());
    EXPECT_TRUE(check_config(s, cfg({{"root", "A"}, {"x", "1"}})).mentions("active parameter not assigned"));
    EXPECT_TRUE(check_config(s, cfg({{"root", "B"}, {"z", "1"}, {"x", "1"}})).mentions("inactive parameter assigned"));
    EXPECT_TRUE(check_config(s, cfg({{"root", "B"}, {"z", "9"}})).mentions("outside domain"));
}

TEST(CompleteConfig, FillsDefaultsAndDropsInactive) {
    const auto s = default_space();
    const auto c = complete_config(s, cfg({{"flow", "rag"}, {"retriever", "sparse"}, {"embedding", "thenlper/gte-large"}}));
    EXPECT_TRUE(check_config(s, c).ok()) << check_config(s, c).summary();
    EXPECT_FALSE(c.contains("embedding"));
    EXPECT_EQ(c.get_string("llm"), "gpt-4o-mini");
    EXPECT_EQ(std::get<std::int64_t>(c.at("top_k")), 5);
}

TEST(Cardinality, HandExample) {
    EXPECT_NEAR(cardinality_log10(small_space()), std::log10(13.0), 1e-12);
}

TEST(Cardinality, SingleCategorical) {
    SearchSpace s({{"r", Categorical{{"a", "b", "c", "d", "e"}}, {}, std::nullopt}}, {}, "r");
    EXPECT_NEAR(cardinality_log10(s), std::log10(5.0), 1e-12);
}

TEST(Cardinality, DefaultSpaceOrderOfMagnitude) {
    const double c = cardinality_log10(default_space());
    EXPECT_GE(c, 20.0);
    EXPECT_LE(c, 26.0);
}

TEST(Cardinality, MatchesBruteForceEnumeration) {
    Rng rng(8);
    for (int rep = 0; rep < 60; ++rep) {
        const auto s = testutil::random_space(rng, 2 + static_cast<int>(rng.below(7)));
        const auto n = testutil::enumerate_configs(s).size();
        EXPECT_NEAR(cardinality_log10(s), std::log10(static_cast<double>(n)), 1e-9);
    }
}

TEST(Encode, InactiveAbsenceEncodesIdentically) {
    const auto s = small_space();
    // z is inactive under root=A; the layout still reserves its slots.
    const auto a = encode(s, cfg({{"root", "A"}, {"x", "1"}, {"y", "3"}}));
    const auto layout = encoding_layout(s);
    ASSERT_EQ(a.size(), layout.size);
    const auto& zb = layout.blocks[3];
    for (std::size_t i = 0; i < zb.width; ++i) EXPECT_EQ(a[zb.offset + i], 0.0);
    EXPECT_EQ(a[*zb.activity], 0.0);
    EXPECT_THROW(encode(s, cfg({{"root", "A"}, {"x", "1"}, {"y", "3"}, {"z", "1"}})), ConfigError);
}

TEST(Encode, NumericEndpoints) {
    SearchSpace s({{"r", Categorical{{"a"}}, {}, std::nullopt},
                   {"k", Integer{2, 20, 2}, {}, std::nullopt},
                   {"t", Real{10.0, 1000.0, true, 64}, {}, std::nullopt}},
                  {}, "r");
    auto lo = encode(s, cfg({{"r", "a"}, {"k", std::int64_t{2}}, {"t", 10.0}}));
    auto hi = encode(s, cfg({{"r", "a"}, {"k", std::int64_t{20}}, {"t", 1000.0}}));
    auto mid = encode(s, cfg({{"r", "a"}, {"k", std::int64_t{2}}, {"t", 100.0}}));
    EXPECT_EQ(lo, (std::vector<double>{1.0, 0.0, 0.0}));
    EXPECT_EQ(hi, (std::vector<double>{1.0, 1.0, 1.0}));
    EXPECT_NEAR(mid[2], 0.5, 1e-12);
}

TEST(Encode, HandLayout) {
    // root {A,B} | c {p,q,r} when A | k int [0,10] | t real [0,4] when B
    SearchSpace s({{"root", Categorical{{"A", "B"}}, {}, std::nullopt},
                   {"c", Categorical{{"p", "q", "r"}}, {}, std::nullopt},
                   {"k", Integer{0, 10, 5}, {}, std::nullopt},
                   {"t", Real{0.0, 4.0, false, 64}, {}, std::nullopt}},
                  {{"c", "root", {"A"}}, {"t", "root", {"B"}}}, "root");
    // slots: A B | p q r act_c | k | t act_t
    EXPECT_EQ(encode(s, cfg({{"root", "A"}, {"c", "q"}, {"k", std::int64_t{5}}})),
              (std::vector<double>{1, 0, 0, 1, 0, 1, 0.5, 0, 0}));
    EXPECT_EQ(encode(s, cfg({{"root", "B"}, {"k", std::int64_t{10}}, {"t", 1.0}})),
              (std::vector<double>{0, 1, 0, 0, 0, 0, 1.0, 0.25, 1}));
}

TEST(Encode, InjectiveOnEnumeratedSpaces) {
    Rng rng(13);
    for (int rep = 0; rep < 30; ++rep) {
        const auto s = testutil::random_space(rng, 6);
        std::set<std::vector<double>> seen;
        const auto all = testutil::enumerate_configs(s);
        for (const auto& c : all) seen.insert(encode(s, c));
        EXPECT_EQ(seen.size(), all.size());
    }
}

TEST(SpaceIo, RoundTripPreservesStructure) {
    const auto s = default_space();
    const auto j = space_to_json(s);
    const auto back = space_from_json(json::parse(j.dump()));
    EXPECT_EQ(space_to_json(back), j);
    EXPECT_NEAR(cardinality_log10(back), cardinality_log10(s), 1e-12);
}

TEST(SpaceIo, MalformedSpaceThrowsConfigError) {
    EXPECT_THROW(space_from_json(json::parse(R"({"params":[{"name":"a"}],"root":"a"})")), ConfigError);
    EXPECT_THROW(space_from_json(json::parse(R"({"params":[{"name":"a","type":"bogus"}],"root":"a"})")), ConfigError);
}

TEST(SpaceIo, ConfigRecordIsCanonical) {
    const auto s = default_space();
    Rng rng(2);
    for (int i = 0; i < 50; ++i) {
        const auto c = sample_random(s, rng);
        const auto rec = config_to_record(c);
        const auto back = config_from_json(s, json::parse(rec));
        EXPECT_EQ(back, c);
        EXPECT_EQ(config_to_record(back), rec);
    }
    FlowConfig a, b;
    a.set("z", std::string("1"));
    a.set("a", std::int64_t{2});
    b.set("a", std::int64_t{2});
    b.set("z", std::string("1"));
    EXPECT_EQ(config_to_record(a), R"({"a":2,"z":"1"})");
    EXPECT_EQ(config_to_record(a), config_to_record(b));
}

TEST(SpaceIo, TypeMismatchThrows) {
    const auto s = default_space();
    EXPECT_THROW(config_from_json(s, json::parse(R"({"top_k":"five"})")), ConfigError);
    EXPECT_THROW(config_from_json(s, json::parse(R"({"flow":3})")), ConfigError);
    EXPECT_THROW(config_from_json(s, json::parse(R"({"top_k":2.5})")), ConfigError);
}
