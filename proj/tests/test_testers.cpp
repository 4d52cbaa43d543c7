#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "bnit/bounds.hpp"
#include "bnit/instances.hpp"
#include "bnit/testers.hpp"

using namespace bnit;

namespace {

SampleSet constant_samples(std::size_t m, std::size_t k, std::size_t ones_in_first = 0) {
    SampleSetBuilder b(m, k);
    for (std::size_t s = 0; s < ones_in_first; ++s) b.set(s, 0, true);
    return std::move(b).build();
}

DenseDistribution pair_plus_uniform() {
    // coordinates 0,1 perfectly correlated, coordinate 2 independent uniform
    std::vector<double> m(8, 0.0);
    for (std::size_t c : {0u, 4u, 3u, 7u}) m[c] = 0.25;
    return DenseDistribution(3, m);
}

Errc code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return Errc::ParseError;
}

} // namespace

TEST(Learner, ClampsEmpiricalZeros) {
    auto p = learn_product_chi2(constant_samples(100, 3), 1.0, TesterConfig{});
    for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(p[i], 1.0 / 400);
}

TEST(Learner, EmpiricalFrequency) {
    auto p = learn_product_chi2(constant_samples(100, 1, 60), 1.0, TesterConfig{});
    EXPECT_DOUBLE_EQ(p[0], 0.6);
}

TEST(Learner, UniformSourceConcentrates) {
    auto net = BayesNet::isolated({0.5, 0.5, 0.5, 0.5});
    int good = 0;
    for (int t = 0; t < 100; ++t) {
        Rng rng(500, t);
        auto p = learn_product_chi2(net.sample(rng, 100000), 0.1);
        bool ok = true;
        for (std::size_t i = 0; i < 4; ++i) ok = ok && std::fabs(p[i] - 0.5) <= 0.01;
        good += ok;
    }
    // each marginal has sd 0.0016; +-0.01 is over 6 sd
    EXPECT_GE(good, 99);
}

TEST(Learner, InsufficientSamplesCarriesRequirement) {
    try {
        learn_product_chi2(constant_samples(10, 3), 0.5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::InsufficientSamples);
        EXPECT_EQ(e.required(), 240u);  // 10 * 2 * 3 / 0.25
    }
}

TEST(IdentityStatistic, MeanMatchesClosedForm) {
    // E[Z] = m^2 chi2(p, q) - m sum_x p_x^2 / q_x for fixed-m multinomial counts
    auto q = DenseDistribution::uniform(2);
    DenseDistribution p(2, {0.4, 0.3, 0.2, 0.1});
    const double m = 400;
    double sum_p2q = 0;
    for (std::size_t x = 0; x < 4; ++x) sum_p2q += p[x] * p[x] / q[x];
    double expect = m * m * chi2(p, q) - m * sum_p2q;
    double acc = 0, acc2 = 0;
    const int trials = 4000;
    for (int t = 0; t < trials; ++t) {
        Rng rng(21, t);
        auto S = sample_dense(p, rng, std::size_t(m));
        double z = identity_statistic(S.cell_counts(0, S.size()), q.mass(), m);
        acc += z;
        acc2 += z * z;
    }
    double mean = acc / trials, se = std::sqrt((acc2 / trials - mean * mean) / trials);
    EXPECT_NEAR(mean, expect, 5 * se);
}

TEST(IdentityTest, UniformNullAccepted) {
    auto q = DenseDistribution::uniform(4);
    int acc = 0;
    for (int t = 0; t < 300; ++t) {
        Rng rng(31, t);
        auto r = identity_test_chi2_hellinger(sample_dense(q, rng, 2000), q, 0.4);
        acc += r.verdict == Verdict::accept;
    }
    EXPECT_GE(acc, 291);
}

TEST(IdentityTest, PointMassRejected) {
    auto q = DenseDistribution::uniform(4);
    std::vector<double> pm(16, 0.0);
    pm[5] = 1.0;
    DenseDistribution P(4, pm);
    EXPECT_GT(hellinger(P, q), 0.4);
    int rej = 0;
    for (int t = 0; t < 300; ++t) {
        Rng rng(32, t);
        rej += identity_test_chi2_hellinger(sample_dense(P, rng, 2000), q, 0.4).verdict == Verdict::reject;
    }
    EXPECT_GE(rej, 291);
}

TEST(IdentityTest, Errors) {
    auto q = DenseDistribution::uniform(2);
    EXPECT_EQ(code_of([&] { identity_test_chi2_hellinger(constant_samples(0, 2), q, 0.4); }), Errc::InsufficientSamples);
    DenseDistribution z(2, {0.5, 0.5, 0.0, 0.0});
    EXPECT_EQ(code_of([&] { identity_test_chi2_hellinger(constant_samples(1000, 2), z, 0.4); }), Errc::ReferenceNotPositive);
}

TEST(IdentityTest, PoissonizedModeRuns) {
    auto q = DenseDistribution::uniform(3);
    TesterConfig cfg;
    cfg.poissonized = true;
    int acc = 0;
    for (int t = 0; t < 50; ++t) {
        Rng rng(33, t), prng(34, t);
        acc += identity_test_chi2_hellinger(sample_dense(q, rng, 3000), q, 0.4, cfg, &prng).verdict == Verdict::accept;
    }
    EXPECT_GE(acc, 45);
}

TEST(HellingerTester, CorrelatedPairFarnessFigure) {
    // brute-force grid over products of three Bernoullis
    auto P = pair_plus_uniform();
    double best = 1.0;
    for (int a = 0; a <= 40; ++a)
        for (int b = 0; b <= 40; ++b)
            for (int c = 0; c <= 10; ++c)
                best = std::min(best, hellinger(P, ProductDistribution({a / 40.0, b / 40.0, c / 10.0}).expand()));
    EXPECT_GE(best, 1.0 - std::pow(2.0, -0.25));
}

TEST(HellingerTester, UniformAcceptedCorrelatedRejected) {
    auto U = DenseDistribution::uniform(3);
    auto C = pair_plus_uniform();
    int acc = 0, rej = 0;
    for (int t = 0; t < 40; ++t) {
        Rng r1(41, t), r2(42, t);
        acc += hellinger_independence_test(sample_dense(U, r1, plan_hellinger(3, 0.35, 0.1, {}).required), 0.35, 0.1).verdict == Verdict::accept;
        rej += hellinger_independence_test(sample_dense(C, r2, plan_hellinger(3, 0.15, 0.1, {}).required), 0.15, 0.1).verdict == Verdict::reject;
    }
    EXPECT_GE(acc, 36);
    EXPECT_GE(rej, 36);
}

TEST(HellingerTester, PlanFollowsFormulas) {
    auto p = plan_hellinger(3, 0.35, 0.1, {});
    EXPECT_EQ(p.m1, std::uint64_t(std::ceil(10 * 6 / (0.35 * 0.35))));
    EXPECT_EQ(p.m2, std::uint64_t(std::ceil(10 * std::sqrt(8.0) / (0.35 * 0.35))));
    EXPECT_EQ(p.rounds, 2 * std::uint64_t(std::ceil(9 * std::log(10.0))) + 1);
    EXPECT_EQ(p.required, p.m1 + p.rounds * p.m2);
}

TEST(HellingerTester, Errors) {
    EXPECT_EQ(code_of([] { hellinger_independence_test(constant_samples(10, 3), 0.0, 0.1); }), Errc::InvalidEpsilon);
    EXPECT_EQ(code_of([] { hellinger_independence_test(constant_samples(10, 3), 1.5, 0.1); }), Errc::InvalidEpsilon);
    try {
        hellinger_independence_test(constant_samples(10, 3), 0.35, 0.1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::InsufficientSamples);
        EXPECT_EQ(e.required(), plan_hellinger(3, 0.35, 0.1, {}).required);
    }
}

TEST(DegreeD, ExactConstants) {
    for (std::size_t n : {3u, 5u, 10u, 17u, 40u})
        for (std::size_t d : {0u, 1u, 2u}) {
            auto p = plan_degree_d(n, d, 0.3, {});
            double binom = std::tgamma(double(n) + 1) / (std::tgamma(double(d) + 2) * std::tgamma(double(n - d)));
            EXPECT_DOUBLE_EQ(p.delta, 1.0 / (3.0 * std::round(binom)));
            EXPECT_DOUBLE_EQ(p.eps_prime, 0.3 / (std::sqrt(2.0 * double(n)) * (1.0 + std::sqrt(double(d) + 1.0))));
            EXPECT_EQ(p.subsets, std::uint64_t(std::round(binom)));
        }
    EXPECT_THROW(plan_degree_d(3, 3, 0.3, {}), Error);
    EXPECT_THROW(plan_degree_d(200, 40, 0.3, {}), Error);
}

TEST(DegreeD, SubsetEnumerationIsLexicographicAndComplete) {
    std::vector<IndexSet> seen;
    for_each_subset(7, 3, [&](std::uint64_t idx, const IndexSet& T) {
        EXPECT_EQ(idx, seen.size());
        seen.push_back(T);
        return true;
    });
    EXPECT_EQ(seen.size(), binom_u64(7, 3));
    for (std::size_t i = 1; i < seen.size(); ++i) EXPECT_LT(seen[i - 1], seen[i]);
    EXPECT_EQ(seen.front(), (IndexSet{0, 1, 2}));
    EXPECT_EQ(seen.back(), (IndexSet{4, 5, 6}));
}

TEST(DegreeD, DrawsOneMultisetOfExactlyM) {
    Rng g(7, 0);
    auto net = random_product_net(5, 1, g);
    std::size_t calls = 0, drawn = 0;
    auto sampler = [&](Rng& r, std::size_t m) {
        ++calls;
        drawn += m;
        return net.sample(r, m);
    };
    Rng rng(8, 8);
    auto rep = independence_test_degree_d(sampler, 5, 1, 0.5, {}, rng);
    auto plan = plan_degree_d(5, 1, 0.5, {});
    EXPECT_EQ(calls, 1u);
    EXPECT_EQ(drawn, plan.m);
    EXPECT_EQ(rep.samples_used, plan.m);
    EXPECT_GE(plan.m, plan.subset_plan.required);
    EXPECT_GE(plan.m, plan.m_formula);
}

TEST(DegreeD, DegreeZeroAlwaysAccepts) {
    Rng g(9, 0);
    auto inst = gen_mixture_of_trees(6, 1, 0.5, g);
    auto sampler = [&](Rng& r, std::size_t m) { return inst.net.sample(r, m); };
    for (int t = 0; t < 5; ++t) {
        Rng rng(10, t);
        EXPECT_EQ(independence_test_degree_d(sampler, 6, 0, 0.5, {}, rng).verdict, Verdict::accept);
    }
}

TEST(DegreeD, ProductAcceptedAndTreeRejectedWithMatchedWitness) {
    int acc = 0, rej = 0, witness_ok = 0;
    for (int t = 0; t < 10; ++t) {
        Rng g(11, t);
        auto prod = random_product_net(6, 1, g);
        auto tree = gen_mixture_of_trees(6, 1, 0.6, g);
        Rng r1(12, t), r2(13, t);
        auto a = independence_test_degree_d([&](Rng& r, std::size_t m) { return prod.sample(r, m); }, 6, 1, 0.6, {}, r1);
        auto b = independence_test_degree_d([&](Rng& r, std::size_t m) { return tree.net.sample(r, m); }, 6, 1, 0.6, {}, r2);
        acc += a.verdict == Verdict::accept;
        EXPECT_FALSE(a.verdict == Verdict::accept && a.witness_subset);
        if (b.verdict == Verdict::reject) {
            ++rej;
            ASSERT_TRUE(b.witness_subset);
            auto pairs = tree.params.matched_coordinate_pairs();
            witness_ok += std::find(pairs.begin(), pairs.end(), *b.witness_subset) != pairs.end();
        }
    }
    EXPECT_GE(acc, 9);
    EXPECT_GE(rej, 9);
    EXPECT_EQ(witness_ok, rej);
}

TEST(DegreeD, ParallelMatchesSequential) {
    for (int t = 0; t < 4; ++t) {
        Rng g(14, t);
        auto tree = gen_mixture_of_trees(7, 2, 0.5, g);
        auto prod = random_product_net(7, 2, g);
        for (const BayesNet* net : {&tree.net, &prod}) {
            TesterConfig seq, par;
            seq.sample_budget = 60000;
            par.sample_budget = 60000;
            par.threads = 4;
            Rng r1(15, t), r2(15, t);
            auto sampler = [&](Rng& r, std::size_t m) { return net->sample(r, m); };
            auto a = independence_test_degree_d(sampler, 7, 2, 0.5, seq, r1);
            auto b = independence_test_degree_d(sampler, 7, 2, 0.5, par, r2);
            EXPECT_EQ(a.verdict, b.verdict);
            EXPECT_EQ(a.witness_subset, b.witness_subset);
            EXPECT_EQ(a.statistic, b.statistic);
            EXPECT_EQ(a.threshold, b.threshold);
        }
    }
}

TEST(DegreeD, BudgetedModeRunsBelowRequirement) {
    Rng g(16, 0);
    auto prod = random_product_net(6, 1, g);
    TesterConfig cfg;
    cfg.sample_budget = 5000;
    Rng rng(17, 0);
    auto rep = independence_test_degree_d([&](Rng& r, std::size_t m) { return prod.sample(r, m); }, 6, 1, 0.5, cfg, rng);
    EXPECT_EQ(rep.samples_used, 5000u);
}

TEST(Calibration, KeyFormat) {
    EXPECT_EQ(calibration_key(16, 0.3, 2000), "16:0.3:2000");
    EXPECT_EQ(calibration_key(8, 0.125, 7), "8:0.125:7");
}

TEST(Calibration, TriviallySeparatedHasNoErrors) {
    Rng rng(51, 0);
    auto r = calibrate_threshold_detail(4, 1.0, 2000, 1000, rng);
    EXPECT_EQ(r.type1, 0.0);
    EXPECT_EQ(r.type2, 0.0);
}

TEST(Calibration, DeterministicAndHeldOutErrorsSmall) {
    Rng a(52, 1), b(52, 1);
    double t1 = calibrate_threshold(16, 0.3, 2000, 5000, a);
    double t2 = calibrate_threshold(16, 0.3, 2000, 5000, b);
    EXPECT_EQ(t1, t2);
    Rng fresh(53, 99);
    auto [fa, miss] = calibration_errors(16, 0.3, 2000, t1, 5000, fresh);
    EXPECT_LE(fa, 1.0 / 6 + 0.02);
    EXPECT_LE(miss, 1.0 / 6 + 0.02);
}

TEST(Calibration, NeedsEnoughTrials) {
    Rng rng(54, 0);
    EXPECT_THROW(calibrate_threshold(16, 0.3, 2000, 999, rng), Error);
}

TEST(Calibration, CacheRoundTripAndCalibratedMode) {
    auto dir = std::filesystem::temp_directory_path() / "bnit_cache_test";
    std::filesystem::remove_all(dir);
    {
        CalibrationCache cache(dir / "calibration.json");
        double tau = cached_threshold(cache, 8, 0.5, 1500, 1000, 3);
        EXPECT_EQ(cache.lookup("8:0.5:1500"), tau);
        TesterConfig cfg;
        cfg.threshold_mode = ThresholdMode::calibrated;
        cfg.cache = &cache;
        cfg.calibration_trials = 1000;
        cfg.calibration_seed = 3;
        auto q = DenseDistribution::uniform(3);
        Rng rng(55, 0);
        auto rep = identity_test_chi2_hellinger(sample_dense(q, rng, 1500), q, 0.5, cfg);
        EXPECT_EQ(rep.threshold, tau);
    }
    CalibrationCache reloaded(dir / "calibration.json");
    EXPECT_TRUE(reloaded.lookup("8:0.5:1500").has_value());
    std::filesystem::remove_all(dir);
}
