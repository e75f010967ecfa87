#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "flowsearch/default_space.hpp"
#include "flowsearch/motpe.hpp"
#include "test_util.hpp"

using namespace flowsearch;

namespace {

ObjectiveVector ov(double acc, double cost) { return {acc, cost, std::nullopt}; }

Observation obs(FlowConfig c, double acc, double cost, bool pruned = false) { return {std::move(c), ov(acc, cost), pruned}; }

FlowConfig cfg(std::map<std::string, Value> m) { return FlowConfig(std::move(m)); }

SearchSpace two_cat() {
    return SearchSpace({{"root", Categorical{{"A", "B"}}, {}, std::nullopt}, {"c", Categorical{{"x", "y", "z"}}, {}, std::nullopt}}, {},
                       "root");
}

/// Simpson's rule over [a, b] with n (even) panels.
template <class F>
double simpson(F f, double a, double b, int n = 20000) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

} // namespace

TEST(Split, GoodSizeIsCeilGammaN) {
    std::vector<Observation> h;
    for (int i = 0; i < 8; ++i) h.push_back(obs({}, 0.1 * i, 1.0 + i));
    const auto s = split_observations(h, 0.25);
    EXPECT_EQ(s.good.size(), 2u);
    EXPECT_EQ(s.bad.size(), 6u);
}

TEST(Split, EmptyThrows) { EXPECT_THROW(split_observations({}, 0.25), std::invalid_argument); }

TEST(Split, DominatingTrialIsGood) {
    std::vector<Observation> h;
    Rng rng(1);
    for (int i = 0; i < 12; ++i) h.push_back(obs({}, rng.uniform(0, 0.8), rng.uniform(1, 2)));
    h.push_back(obs({}, 0.95, 0.5));
    const auto s = split_observations(h, 0.1);
    ASSERT_EQ(s.good.size(), 2u);
    EXPECT_TRUE(std::count(s.good.begin(), s.good.end(), h.size() - 1));
}

TEST(Split, NondominatedSetMatchesBestSubsetOracle) {
    Rng rng(5);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> a, c;
        for (int i = 0; i < 8; ++i) {
            a.push_back(rng.uniform(0.2, 0.9));
            c.push_back(rng.uniform(0.5, 5.0));
        }
        std::sort(a.begin(), a.end());
        std::sort(c.begin(), c.end());
        std::vector<Observation> h;
        for (int i = 0; i < 8; ++i) h.push_back(obs({}, a[i], c[i]));
        testutil::Rng shuf(rep);
        shuf.shuffle(h);

        const ObjectiveVector ref = ov(0.9 * a.front(), 1.1 * c.back());
        double best = 0.0;
        for (int i = 0; i < 8; ++i)
            for (int j = i + 1; j < 8; ++j) {
                ParetoFront f;
                f.insert({0, h[i].objectives});
                f.insert({1, h[j].objectives});
                best = std::max(best, hypervolume(f, ref));
            }
        const auto s = split_observations(h, 0.25);
        ASSERT_EQ(s.good.size(), 2u);
        ParetoFront f;
        for (auto i : s.good) f.insert({static_cast<std::int64_t>(i), h[i].objectives});
        EXPECT_NEAR(hypervolume(f, ref), best, 1e-12);
    }
}

TEST(Split, PartitionAndPrunedAlwaysBad) {
    Rng rng(7);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<Observation> h;
        const int n = 1 + static_cast<int>(rng.below(40));
        for (int i = 0; i < n; ++i) h.push_back(obs({}, rng.uniform(), rng.uniform(0.1, 1), rng.bernoulli(0.3)));
        const double gamma = rng.uniform(0.05, 0.95);
        const auto s = split_observations(h, gamma);
        std::set<std::size_t> all(s.good.begin(), s.good.end());
        all.insert(s.bad.begin(), s.bad.end());
        EXPECT_EQ(all.size(), h.size());
        EXPECT_EQ(s.good.size() + s.bad.size(), h.size());
        const auto completed = std::count_if(h.begin(), h.end(), [](const Observation& o) { return !o.pruned; });
        EXPECT_EQ(s.good.size(), static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(completed) - 1e-12)));
        for (auto i : s.good) EXPECT_FALSE(h[i].pruned);
    }
}

TEST(FitDensity, CategoricalSmoothing) {
    ParamSpec p{"c", Categorical{{"a", "b", "c"}}, {}, std::nullopt};
    const auto d = fit_density(p, {Value{"a"}, Value{"a"}, Value{"a"}, Value{"b"}});
    EXPECT_NEAR(d.evaluate(p, Value{"a"}), 4.0 / 7.0, 1e-15);
    EXPECT_NEAR(d.evaluate(p, Value{"b"}), 2.0 / 7.0, 1e-15);
    EXPECT_NEAR(d.evaluate(p, Value{"c"}), 1.0 / 7.0, 1e-15);
}

TEST(FitDensity, NoObservationsIsUniform) {
    ParamSpec p{"c", Categorical{{"a", "b", "c", "d"}}, {}, std::nullopt};
    const auto d = fit_density(p, {});
    for (const auto& v : p.values()) EXPECT_NEAR(d.evaluate(p, Value{v}), 0.25, 1e-15);
    ParamSpec r{"r", Real{2.0, 6.0, false, 64}, {}, std::nullopt};
    const auto dr = fit_density(r, {});
    EXPECT_NEAR(dr.evaluate(r, Value{3.0}), 0.25, 1e-15);
    ParamSpec k{"k", Integer{0, 8, 2}, {}, std::nullopt};
    EXPECT_NEAR(fit_density(k, {}).evaluate(k, Value{std::int64_t{4}}), 0.2, 1e-15);
}

TEST(FitDensity, RealIntegratesToOne) {
    Rng rng(3);
    for (bool log : {false, true}) {
        ParamSpec p{"r", Real{1.0, 50.0, log, 64}, {}, std::nullopt};
        for (int n : {1, 3, 17, 120}) {
            std::vector<Value> obsv;
            for (int i = 0; i < n; ++i) obsv.emplace_back(log ? std::exp(rng.uniform(0, std::log(50.0))) : rng.uniform(1, 50));
            const auto d = fit_density(p, obsv);
            const auto& nd = std::get<NumericDensity>(d.body);
            EXPECT_NEAR(simpson([&](double t) { return nd.pdf(t); }, nd.a, nd.b), 1.0, 1e-6) << "n=" << n << " log=" << log;
        }
    }
}

TEST(FitDensity, IntegerMassSumsToOne) {
    ParamSpec p{"k", Integer{2, 20, 3}, {}, std::nullopt};
    Rng rng(4);
    for (int n : {0, 1, 5, 40}) {
        std::vector<Value> obsv;
        for (int i = 0; i < n; ++i) obsv.emplace_back(sample_value(p, rng));
        const auto d = fit_density(p, obsv);
        double total = 0.0;
        for (const auto& v : p.grid_values()) total += d.evaluate(p, v);
        EXPECT_NEAR(total, 1.0, 1e-12);
    }
}

TEST(FitDensity, BandwidthRule) {
    ParamSpec p{"r", Real{0.0, 10.0, false, 64}, {}, std::nullopt};
    auto sigma = [&](int n) {
        std::vector<Value> v(static_cast<std::size_t>(n), Value{5.0});
        return std::get<NumericDensity>(fit_density(p, v).body).sigma;
    };
    EXPECT_NEAR(sigma(1), 10.0, 1e-12);                  // max(1, 1) -> full range
    EXPECT_NEAR(sigma(5), 10.0 / std::pow(5.0, 1 / 1.2), 1e-12);
    EXPECT_NEAR(sigma(1000), 10.0 / 100.0, 1e-12);       // floor range / 100
    // n = 2: 10 / 2^(1/1.2) = 5.61 is above the floor 10/20.
    EXPECT_NEAR(sigma(2), 10.0 / std::pow(2.0, 1 / 1.2), 1e-12);
}

TEST(FitDensity, OutOfDomainThrows) {
    ParamSpec p{"c", Categorical{{"a"}}, {}, std::nullopt};
    EXPECT_THROW(fit_density(p, {Value{"z"}}), ConfigError);
    const auto d = fit_density(p, {});
    EXPECT_THROW(d.evaluate(p, Value{"z"}), ConfigError);
}

TEST(FitModel, InactiveObservationIsRejected) {
    SearchSpace s({{"root", Categorical{{"A", "B"}}, {}, std::nullopt}, {"x", Categorical{{"1", "2"}}, {}, std::nullopt}},
                  {{"x", "root", {"A"}}}, "root");
    const auto bad = cfg({{"root", "B"}, {"x", "1"}});
    EXPECT_THROW(fit_model(s, {&bad}), std::logic_error);
    const auto ok = cfg({{"root", "B"}});
    EXPECT_NO_THROW(fit_model(s, {&ok}));
}

TEST(Acquisition, EqualDensitiesScoreOne) {
    const auto s = default_space();
    Rng rng(9);
    std::vector<FlowConfig> cs;
    for (int i = 0; i < 20; ++i) cs.push_back(sample_random(s, rng));
    std::vector<const FlowConfig*> ptrs;
    for (const auto& c : cs) ptrs.push_back(&c);
    const auto m = fit_model(s, ptrs);
    for (int i = 0; i < 20; ++i) EXPECT_NEAR(acquisition(s, sample_random(s, rng), m, m), 1.0, 1e-12);
}

TEST(Acquisition, GoodOnlyValueScoresAboveOne) {
    const auto s = two_cat();
    std::vector<FlowConfig> good(10, cfg({{"root", "A"}, {"c", "x"}})), bad = {cfg({{"root", "B"}, {"c", "y"}})};
    std::vector<const FlowConfig*> gp, bp;
    for (const auto& c : good) gp.push_back(&c);
    for (const auto& c : bad) bp.push_back(&c);
    EXPECT_GT(acquisition(s, good[0], fit_model(s, gp), fit_model(s, bp)), 1.0);
}

TEST(Acquisition, HandComputedProduct) {
    const auto s = two_cat();
    const std::vector<FlowConfig> good = {cfg({{"root", "A"}, {"c", "x"}}), cfg({{"root", "A"}, {"c", "y"}})};
    const std::vector<FlowConfig> bad = {cfg({{"root", "B"}, {"c", "x"}}), cfg({{"root", "A"}, {"c", "z"}}),
                                         cfg({{"root", "B"}, {"c", "z"}})};
    std::vector<const FlowConfig*> gp, bp;
    for (const auto& c : good) gp.push_back(&c);
    for (const auto& c : bad) bp.push_back(&c);
    // l(A)=3/4, g(A)=2/5; l(y)=2/5, g(y)=1/6.
    EXPECT_NEAR(acquisition(s, cfg({{"root", "A"}, {"c", "y"}}), fit_model(s, gp), fit_model(s, bp)),
                (0.75 / 0.4) * (0.4 / (1.0 / 6.0)), 1e-12);
}

TEST(Acquisition, PositiveAndFinite) {
    const auto s = default_space();
    Rng rng(10);
    std::vector<FlowConfig> a, b;
    for (int i = 0; i < 8; ++i) a.push_back(sample_random(s, rng));
    for (int i = 0; i < 30; ++i) b.push_back(sample_random(s, rng));
    std::vector<const FlowConfig*> ap, bp;
    for (const auto& c : a) ap.push_back(&c);
    for (const auto& c : b) bp.push_back(&c);
    const auto l = fit_model(s, ap), g = fit_model(s, bp);
    for (int i = 0; i < 200; ++i) {
        const double v = acquisition(s, sample_random(s, rng), l, g);
        EXPECT_GT(v, 0.0);
        EXPECT_TRUE(std::isfinite(v));
    }
}

TEST(Propose, EmptyHistoryIsRandomSample) {
    const auto s = default_space();
    Rng a(42), b(42);
    EXPECT_EQ(propose({}, s, TpeConfig{}, a), sample_random(s, b));
}

TEST(Propose, FavoursGoodRoot) {
    const auto s = two_cat();
    std::vector<Observation> h;
    Rng rng(12);
    for (int i = 0; i < 10; ++i) {
        h.push_back(obs(cfg({{"root", "A"}, {"c", s.params()[1].values()[rng.below(3)]}}), rng.uniform(0.8, 0.9), rng.uniform(0.1, 0.2)));
        h.push_back(obs(cfg({{"root", "B"}, {"c", s.params()[1].values()[rng.below(3)]}}), rng.uniform(0.1, 0.3), rng.uniform(1.0, 2.0)));
    }
    int a = 0;
    for (int i = 0; i < 1000; ++i) a += propose(h, s, TpeConfig{}, rng).get_string("root") == "A";
    EXPECT_GT(a, 800);
}

TEST(Propose, SingleCandidateIsTheLDraw) {
    const auto s = default_space();
    Rng rng(13);
    std::vector<Observation> h;
    for (int i = 0; i < 16; ++i) h.push_back(obs(sample_random(s, rng), rng.uniform(), rng.uniform(0.1, 1.0), i % 5 == 0));
    TpeConfig cfg1;
    cfg1.n_candidates = 1;
    Rng r1(77), r2(77);
    const auto got = propose(h, s, cfg1, r1);

    const auto split = split_observations(h, cfg1.gamma);
    std::vector<const FlowConfig*> good;
    for (auto i : split.good) good.push_back(&h[i].config);
    EXPECT_EQ(got, sample_from(s, fit_model(s, good), r2));
    EXPECT_TRUE(check_config(s, got).ok());
}

TEST(Propose, DeterministicAndValid) {
    const auto s = default_space();
    Rng rng(14);
    std::vector<Observation> h;
    for (int i = 0; i < 30; ++i) h.push_back(obs(sample_random(s, rng), rng.uniform(), rng.uniform(0.1, 1.0)));
    for (int k = 0; k < 20; ++k) {
        Rng a(k), b(k);
        const auto x = propose(h, s, TpeConfig{}, a);
        EXPECT_EQ(x, propose(h, s, TpeConfig{}, b));
        EXPECT_TRUE(check_config(s, x).ok()) << check_config(s, x).summary();
    }
}

TEST(TpeConfig, Validation) {
    TpeConfig c;
    EXPECT_NO_THROW(c.validate());
    c.gamma = 1.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.n_candidates = 0;
    EXPECT_THROW(c.validate(), ConfigError);
}
