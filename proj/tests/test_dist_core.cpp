#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <fstream>
#include <sstream>

#include "bnit/bounds.hpp"
#include "bnit/io.hpp"

using namespace bnit;

namespace {

// the matched pair with Cov = delta: edge 0 -> 1
BayesNet cov_pair(double delta) {
    return BayesNet(2, {0, 1}, {{}, {0}}, {{0.5}, {(1 - 4 * delta) / 2, (1 + 4 * delta) / 2}});
}

// Pearson GOF p-value; cells with expected count < 5 are pooled
double gof_pvalue(const std::vector<std::uint64_t>& counts, const std::vector<double>& probs) {
    double m = 0;
    for (auto c : counts) m += double(c);
    double stat = 0, pooled_obs = 0, pooled_exp = 0;
    int cells = 0;
    for (std::size_t x = 0; x < counts.size(); ++x) {
        double e = m * probs[x];
        if (e < 5) {
            pooled_obs += double(counts[x]);
            pooled_exp += e;
            continue;
        }
        stat += (double(counts[x]) - e) * (double(counts[x]) - e) / e;
        ++cells;
    }
    if (pooled_exp > 0) {
        stat += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
        ++cells;
    }
    boost::math::chi_squared dist(std::max(1, cells - 1));
    return boost::math::cdf(boost::math::complement(dist, stat));
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST(EvalPmf, UniformIsolatedNodes) {
    auto net = BayesNet::isolated({0.5, 0.5, 0.5});
    EXPECT_DOUBLE_EQ(eval_pmf(net, Assignment::from_string("101")), 0.125);
}

TEST(EvalPmf, DeterministicNet) {
    auto net = BayesNet::isolated({1.0, 1.0});
    EXPECT_EQ(eval_pmf(net, Assignment::from_string("11")), 1.0);
    EXPECT_EQ(eval_pmf(net, Assignment::from_string("01")), 0.0);
}

TEST(EvalPmf, MatchedPairAgreesWithEnumeratedCovariance) {
    const double delta = 0.1;
    auto net = cov_pair(delta);
    EXPECT_NEAR(eval_pmf(net, Assignment::from_string("00")), 0.35, 1e-15);
    double e1 = 0, e2 = 0, e12 = 0;
    for (std::uint64_t x = 0; x < 4; ++x) {
        double p = eval_pmf(net, Assignment::from_code(x, 2));
        e1 += p * double(x & 1);
        e2 += p * double((x >> 1) & 1);
        e12 += p * double((x & 1) & ((x >> 1) & 1));
    }
    EXPECT_NEAR(e12 - e1 * e2, delta, 1e-15);
}

TEST(EvalPmf, DimensionMismatch) {
    auto net = BayesNet::isolated({0.5, 0.5, 0.5});
    try {
        eval_pmf(net, Assignment::from_string("10"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::DimensionMismatch);
    }
}

TEST(BayesNetValidation, RejectsMalformedNets) {
    auto code_of = [](auto&& f) {
        try {
            f();
        } catch (const Error& e) {
            return e.code();
        }
        return Errc::ParseError;
    };
    EXPECT_EQ(code_of([] { BayesNet(2, {1, 0}, {{}, {0}}, {{0.5}, {0.1, 0.2}}); }), Errc::InvalidNet);  // parent after child
    EXPECT_EQ(code_of([] { BayesNet(2, {0, 1}, {{}, {0}}, {{0.5}, {0.1}}); }), Errc::InvalidNet);      // cpt size
    EXPECT_EQ(code_of([] { BayesNet(1, {0}, {{}}, {{1.5}}); }), Errc::InvalidNet);                     // cpt range
    EXPECT_EQ(code_of([] { BayesNet(2, {0, 0}, {{}, {}}, {{0.5}, {0.5}}); }), Errc::InvalidNet);       // order
}

TEST(ToDense, SingleNode) {
    auto P = to_dense(BayesNet::isolated({0.3}));
    ASSERT_EQ(P.size(), 2u);
    EXPECT_NEAR(P[0], 0.7, 1e-15);
    EXPECT_NEAR(P[1], 0.3, 1e-15);
}

TEST(ToDense, MatchedPairMasses) {
    auto P = to_dense(cov_pair(0.1));
    std::vector<double> expect = {0.35, 0.15, 0.15, 0.35};
    for (std::size_t x = 0; x < 4; ++x) EXPECT_NEAR(P[x], expect[x], 1e-15);
}

TEST(ToDense, RandomNetsNormalise) {
    Rng rng(17, 0);
    for (int i = 0; i < 40; ++i) {
        auto net = random_bayes_net(2 + i % 11, 1 + i % 4, rng);
        auto P = net.to_dense();
        EXPECT_NEAR(accurate_sum(P.mass()), 1.0, 1e-12);
        for (std::uint64_t x = 0; x < P.size(); x += 7) EXPECT_NEAR(P[x], eval_pmf(net, Assignment::from_code(x, net.n())), 1e-15);
    }
}

TEST(ToDense, TooLarge) {
    auto net = BayesNet::isolated(std::vector<double>(25, 0.5));
    try {
        net.to_dense();
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::TooLargeForDense);
    }
}

TEST(Sample, DeterministicNetGivesAllOnes) {
    auto net = BayesNet::isolated({1.0, 1.0, 1.0, 1.0});
    Rng rng(1, 1);
    for (const auto& x : net.sample_list(rng, 5)) EXPECT_EQ(x.str(), "1111");
}

TEST(Sample, SameStateGivesIdenticalSamples) {
    Rng g(9, 0);
    auto net = random_bayes_net(9, 3, g);
    Rng a(123, 4), b(123, 4);
    auto sa = net.sample_list(a, 300), sb = net.sample_list(b, 300);
    EXPECT_EQ(sa, sb);
}

TEST(Sample, PrefixOfLongerStream) {
    Rng g(10, 0);
    auto net = random_bayes_net(7, 2, g);
    Rng a(5, 5), b(5, 5);
    auto short_run = net.sample_list(a, 50), long_run = net.sample_list(b, 130);
    for (std::size_t s = 0; s < 50; ++s) EXPECT_EQ(short_run[s], long_run[s]);
}

TEST(Sample, GoodnessOfFitAgainstDense) {
    Rng g(31, 0);
    for (std::size_t n : {6u, 8u}) {
        auto net = random_bayes_net(n, 3, g);
        auto P = net.to_dense();
        Rng rng(77, n);
        auto S = net.sample(rng, 200000);
        auto counts = S.cell_counts(0, S.size());
        EXPECT_GT(gof_pvalue(counts, P.mass()), 1e-6) << "n = " << n;
    }
}

TEST(Restrict, Examples) {
    auto x = Assignment::from_string("10110");
    EXPECT_EQ(restrict(x, {0, 2, 4}).str(), "110");
    EXPECT_EQ(restrict(x, {0, 1, 2, 3, 4}), x);
    EXPECT_THROW(restrict(x, {1, 7}), Error);
    EXPECT_THROW(restrict(x, {3, 1}), Error);
}

TEST(Restrict, SampleRestrictionMatchesDenseMarginal) {
    Rng g(41, 0);
    auto net = random_bayes_net(6, 2, g);
    auto P = net.to_dense();
    Rng rng(3, 3);
    auto S = net.sample(rng, 200000);
    IndexSet T = {1, 3, 4};
    auto R = S.restrict(T);
    EXPECT_EQ(R.at(17), restrict(S.at(17), T));
    EXPECT_GT(gof_pvalue(R.cell_counts(0, R.size()), marginalize(P, T).mass()), 1e-6);
}

TEST(SampleSet, PopcountCountsMatchGather) {
    Rng g(5, 1);
    auto net = random_bayes_net(10, 3, g);
    Rng rng(6, 6);
    auto S = net.sample(rng, 1000);
    for (int it = 0; it < 60; ++it) {
        std::size_t k = 1 + g.below(8);
        auto T = random_subset(10, k, g);
        auto R = S.restrict(T);
        std::size_t b = g.below(1000), e = g.below(1001);
        if (b > e) std::swap(b, e);
        EXPECT_EQ(R.cell_counts(b, e), R.cell_counts_gather(b, e));
    }
}

TEST(Marginalize, Examples) {
    auto P = ProductDistribution({0.2, 0.9}).expand();
    auto M = marginalize(P, {1});
    EXPECT_NEAR(M[0], 0.1, 1e-15);
    EXPECT_NEAR(M[1], 0.9, 1e-15);
    Rng g(1, 9);
    auto Q = random_dense(4, g);
    EXPECT_LT(tv(marginalize(Q, {0, 1, 2, 3}), Q), 1e-15);
}

TEST(ProductOfMarginals, Examples) {
    auto P = ProductDistribution({0.2, 0.7, 0.55}).expand();
    EXPECT_LT(tv(product_of_marginals(P).expand(), P), 1e-12);
    auto pair = to_dense(cov_pair(0.1));
    auto pm = product_of_marginals(pair);
    EXPECT_NEAR(pm[0], 0.5, 1e-15);
    EXPECT_NEAR(pm[1], 0.5, 1e-15);
    Rng g(2, 9);
    auto Q = random_dense(5, g);
    auto once = product_of_marginals(Q);
    auto twice = product_of_marginals(once.expand());
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(once[i], twice[i], 1e-15);
}

TEST(Distances, Examples) {
    auto h = [](double p) { return ProductDistribution({p}).expand(); };
    EXPECT_EQ(tv(h(0.3), h(0.3)), 0.0);
    EXPECT_NEAR(tv(h(0.5), h(0.65)), 0.15, 1e-15);
    EXPECT_NEAR(tv(DenseDistribution(2, {1, 0, 0, 0}), DenseDistribution(2, {0, 0, 0, 1})), 1.0, 1e-15);
    EXPECT_EQ(hellinger(h(0.3), h(0.3)), 0.0);
    EXPECT_EQ(chi2(h(0.3), h(0.3)), 0.0);
    EXPECT_NEAR(hellinger_sq(h(0.0), h(1.0)), 1.0, 1e-15);
    EXPECT_NEAR(chi2(h(0.6), h(0.5)), 0.04, 1e-15);
    EXPECT_TRUE(std::isinf(chi2(h(0.5), h(0.0))));
    EXPECT_THROW(tv(h(0.5), DenseDistribution::uniform(2)), Error);
}

TEST(Distances, InequalityChainOnRandomPairs) {
    Rng g(99, 0);
    for (int i = 0; i < 1000; ++i) {
        std::size_t n = 1 + i % 6;
        auto P = random_dense(n, g, i % 4 == 0 ? 0.3 : 0.0);
        auto Q = random_dense(n, g, i % 7 == 0 ? 0.3 : 0.0);
        double h = hellinger(P, Q), t = tv(P, Q), c = chi2(P, Q);
        ASSERT_LE(h * h, t + 1e-9);
        ASSERT_LE(t, std::sqrt(2.0) * h + 1e-9);
        ASSERT_LE(std::sqrt(2.0) * h, std::sqrt(c) + 1e-9);
    }
}

TEST(Distances, DataProcessingUnderMarginalisation) {
    Rng g(100, 0);
    for (int i = 0; i < 300; ++i) {
        std::size_t n = 2 + i % 5;
        auto P = random_dense(n, g), Q = random_dense(n, g);
        auto T = random_subset(n, 1 + g.below(n), g);
        auto mp = marginalize(P, T), mq = marginalize(Q, T);
        ASSERT_LE(tv(mp, mq), tv(P, Q) + 1e-12);
        ASSERT_LE(hellinger(mp, mq), hellinger(P, Q) + 1e-12);
        ASSERT_LE(chi2(mp, mq), chi2(P, Q) * (1 + 1e-12) + 1e-12);
    }
}

TEST(Json, BayesNetGolden) {
    auto net = cov_pair(0.1);
    auto text = to_json(net).dump();
    EXPECT_EQ(text + "\n", slurp(std::string(BNIT_GOLDEN_DIR) + "/bayes_net.json"));
    auto back = bayes_net_from_json(json::parse(text));
    EXPECT_TRUE(back.same_structure(net));
    EXPECT_EQ(back.cpt(), net.cpt());
}

TEST(Json, DenseGolden) {
    DenseDistribution P(1, {0.25, 0.75});
    EXPECT_EQ(to_json(P).dump() + "\n", slurp(std::string(BNIT_GOLDEN_DIR) + "/dense.json"));
    EXPECT_EQ(dense_from_json(to_json(P)).mass(), P.mass());
}

TEST(Json, MalformedNetIsParseError) {
    try {
        bayes_net_from_json(json::parse(R"({"n": 2, "order": [0, 1]})"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::ParseError);
    }
}
