#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bnit/bayes_net.hpp"
#include "bnit/dense.hpp"
#include "bnit/error.hpp"
#include "bnit/rng.hpp"

namespace bnit {

enum class OddChildPolicy { leave_unmatched, refuse };

inline constexpr std::size_t kInstanceDenseMax = 14;

// d-1 uniform pointer bits (coordinates 0..d-2) pick one of D = 2^{d-1} trees on the
// N = n-d+1 children (coordinates d-1..n-1). All trees share the matching lambda.
struct MixtureOfTreesParams {
    std::size_t n = 0, d = 0, N = 0, D = 0;
    double eps = 0.0, delta = 0.0;
    std::vector<std::pair<std::size_t, std::size_t>> lambda;  // child indices in [0, N)
    std::optional<std::size_t> unmatched;
    std::vector<std::vector<std::uint8_t>> mu;                // D rows, one bit per pair

    std::size_t pointer_bits() const { return d - 1; }
    std::size_t pairs() const { return lambda.size(); }
    std::size_t child_coord(std::size_t c) const { return d - 1 + c; }
    double z0() const { return (1 + 4 * delta) / (1 - 4 * delta); }
    double z1() const {
        double a = 16 * delta * delta;
        return (1 + a) / (1 - a);
    }
    double z2() const {
        double a = std::pow(4 * delta, 4);
        return (1 + a) / (1 - a);
    }

    std::size_t component(std::uint64_t x) const { return std::size_t(x & ((std::uint64_t(1) << pointer_bits()) - 1)); }

    std::size_t matching_count(std::uint64_t x) const {
        const auto& row = mu[component(x)];
        std::size_t c = 0;
        for (std::size_t k = 0; k < lambda.size(); ++k) {
            auto bi = (x >> child_coord(lambda[k].first)) & 1u;
            auto bj = (x >> child_coord(lambda[k].second)) & 1u;
            c += (bi ^ bj) == row[k];
        }
        return c;
    }

    double closed_form_pmf(std::uint64_t x) const {
        std::size_t c = matching_count(x);
        return std::ldexp(std::pow(1 + 4 * delta, double(c)) * std::pow(1 - 4 * delta, double(pairs() - c)), -int(n));
    }

    IndexSet pointer_coords() const {
        IndexSet t;
        for (std::size_t i = 0; i + 1 < d; ++i) t.push_back(i);
        return t;
    }

    std::vector<IndexSet> matched_coordinate_pairs() const {
        std::vector<IndexSet> out;
        for (auto [a, b] : lambda) {
            IndexSet p = {child_coord(a), child_coord(b)};
            if (p[0] > p[1]) std::swap(p[0], p[1]);
            out.push_back(p);
        }
        return out;
    }
};

struct MixtureOfTrees {
    MixtureOfTreesParams params;
    BayesNet net;
    std::optional<DenseDistribution> dense;
};

inline BayesNet mixture_of_trees_net(const MixtureOfTreesParams& p) {
    const std::size_t P = p.pointer_bits();
    std::vector<std::size_t> order;
    std::vector<IndexSet> parents(p.n);
    std::vector<std::vector<double>> cpt(p.n);
    for (std::size_t i = 0; i < P; ++i) {
        order.push_back(i);
        cpt[i] = {0.5};
    }
    const double hi = (1 + 4 * p.delta) / 2, lo = (1 - 4 * p.delta) / 2;
    for (std::size_t k = 0; k < p.lambda.size(); ++k) {
        std::size_t a = p.child_coord(p.lambda[k].first), b = p.child_coord(p.lambda[k].second);
        order.push_back(a);
        order.push_back(b);
        cpt[a] = {0.5};
        // parents of b: partner first, then the pointer bits
        parents[b].push_back(a);
        for (std::size_t i = 0; i < P; ++i) parents[b].push_back(i);
        cpt[b].assign(std::size_t(1) << (P + 1), 0.0);
        for (std::size_t pi = 0; pi < cpt[b].size(); ++pi) {
            std::size_t xa = pi & 1u, comp = pi >> 1;
            // Pr[x_a xor x_b = mu] = (1+4delta)/2
            bool one_matches = ((xa ^ 1u) == p.mu[comp][k]);
            cpt[b][pi] = one_matches ? hi : lo;
        }
    }
    if (p.unmatched) {
        std::size_t u = p.child_coord(*p.unmatched);
        order.push_back(u);
        cpt[u] = {0.5};
    }
    return BayesNet(p.n, std::move(order), std::move(parents), std::move(cpt));
}

inline MixtureOfTrees gen_mixture_of_trees(std::size_t n, std::size_t d, double eps, Rng& rng,
                                           OddChildPolicy policy = OddChildPolicy::leave_unmatched) {
    if (d < 1) throw Error(Errc::InvalidArgument, "mixture of trees needs d >= 1");
    if (n < d + 1) throw Error(Errc::InvalidArgument, "mixture of trees needs n >= d + 1");
    if (d > 30) throw Error(Errc::InvalidArgument, "mixture of trees supports d <= 30");
    if (!(eps > 0.0)) throw Error(Errc::InvalidEpsilon, "eps must be positive");
    MixtureOfTreesParams p;
    p.n = n;
    p.d = d;
    p.N = n - d + 1;
    p.D = std::size_t(1) << (d - 1);
    p.eps = eps;
    p.delta = eps / std::sqrt(double(n));
    if (p.N % 2 == 1 && policy == OddChildPolicy::refuse)
        throw Error(Errc::OddChildCount, "N = n - d + 1 = " + std::to_string(p.N) + " must be even");
    if (!(p.delta < 0.25)) throw Error(Errc::RegimeViolation, "delta = eps/sqrt(n) must be below 1/4");
    auto perm = random_permutation(p.N, rng);
    for (std::size_t k = 0; k + 1 < p.N; k += 2) p.lambda.emplace_back(perm[k], perm[k + 1]);
    if (p.N % 2 == 1) p.unmatched = perm[p.N - 1];
    p.mu.assign(p.D, std::vector<std::uint8_t>(p.lambda.size()));
    for (auto& row : p.mu)
        for (auto& b : row) b = std::uint8_t(rng.next_u32() & 1u);
    MixtureOfTrees out{p, mixture_of_trees_net(p), std::nullopt};
    if (n <= kInstanceDenseMax) out.dense = out.net.to_dense();
    return out;
}

// d uniform pointer bits pick one of 2^d products on the N = n-d children.
struct MixtureOfProductsParams {
    std::size_t n = 0, d = 0, N = 0;
    double eps = 0.0, delta = 0.0;
    std::vector<std::vector<std::int8_t>> z;  // 2^d rows of N signs

    double child_p1(std::size_t comp, std::size_t c) const { return 0.5 - double(z[comp][c]) * delta; }

    double closed_form_pmf(std::uint64_t x) const {
        std::size_t comp = std::size_t(x & ((std::uint64_t(1) << d) - 1));
        double v = std::ldexp(1.0, -int(d));
        for (std::size_t c = 0; c < N; ++c) {
            double p1 = child_p1(comp, c);
            v *= ((x >> (d + c)) & 1u) ? p1 : 1 - p1;
        }
        return v;
    }

    ProductDistribution component_product(std::size_t comp) const {
        std::vector<double> p(N);
        for (std::size_t c = 0; c < N; ++c) p[c] = child_p1(comp, c);
        return ProductDistribution(std::move(p));
    }
};

struct MixtureOfProducts {
    MixtureOfProductsParams params;
    BayesNet net;
    std::optional<DenseDistribution> dense;
};

inline BayesNet mixture_of_products_net(const MixtureOfProductsParams& p) {
    std::vector<std::size_t> order(p.n);
    std::vector<IndexSet> parents(p.n);
    std::vector<std::vector<double>> cpt(p.n);
    for (std::size_t i = 0; i < p.n; ++i) order[i] = i;
    for (std::size_t i = 0; i < p.d; ++i) cpt[i] = {0.5};
    for (std::size_t c = 0; c < p.N; ++c) {
        std::size_t node = p.d + c;
        for (std::size_t i = 0; i < p.d; ++i) parents[node].push_back(i);
        cpt[node].resize(std::size_t(1) << p.d);
        for (std::size_t comp = 0; comp < cpt[node].size(); ++comp) cpt[node][comp] = p.child_p1(comp, c);
    }
    return BayesNet(p.n, std::move(order), std::move(parents), std::move(cpt));
}

inline MixtureOfProducts gen_mixture_of_products(std::size_t n, std::size_t d, double eps, Rng& rng) {
    if (d < 1 || 2 * d > n) throw Error(Errc::RegimeViolation, "mixture of products needs 1 <= d <= n/2");
    if (d > 30) throw Error(Errc::InvalidArgument, "mixture of products supports d <= 30");
    MixtureOfProductsParams p;
    p.n = n;
    p.d = d;
    p.N = n - d;
    p.eps = eps;
    p.delta = eps / std::sqrt(double(p.N));
    if (!(eps > 0.0)) throw Error(Errc::InvalidEpsilon, "eps must be positive");
    if (!(p.delta <= 0.5)) throw Error(Errc::RegimeViolation, "delta = eps/sqrt(N) must be at most 1/2");
    p.z.assign(std::size_t(1) << d, std::vector<std::int8_t>(p.N));
    for (auto& row : p.z)
        for (auto& s : row) s = (rng.next_u32() & 1u) ? 1 : -1;
    MixtureOfProducts out{p, mixture_of_products_net(p), std::nullopt};
    if (n <= kInstanceDenseMax) out.dense = out.net.to_dense();
    return out;
}

struct PaninskiParams {
    std::size_t n = 0;
    double eps = 0.0;
    double C = 2.0;
    std::vector<std::uint8_t> in_S;  // indicator over the 2^n points
    double C_eps() const { return C * eps; }
};

struct Paninski {
    PaninskiParams params;
    DenseDistribution dense;
};

inline Paninski gen_paninski(std::size_t n, double eps, Rng& rng, double C = 2.0) {
    if (n < 1 || n > kDenseMax) throw Error(Errc::TooLargeForDense, "Paninski instances are dense, need 1 <= n <= 24");
    if (!(eps > 0.0)) throw Error(Errc::InvalidEpsilon, "eps must be positive");
    if (!(C > 0.0) || C * eps > 1.0) throw Error(Errc::RegimeViolation, "need 0 < C*eps <= 1");
    PaninskiParams p;
    p.n = n;
    p.eps = eps;
    p.C = C;
    const std::size_t K = std::size_t(1) << n;
    p.in_S.assign(K, 0);
    for (auto x : random_subset(K, K / 2, rng)) p.in_S[x] = 1;
    std::vector<double> mass(K);
    for (std::size_t x = 0; x < K; ++x) mass[x] = std::ldexp(p.in_S[x] ? 1 + C * eps : 1 - C * eps, -int(n));
    return Paninski{p, DenseDistribution(n, std::move(mass))};
}

// categorical sampling from a dense pmf; draw index s for sample s
inline SampleSet sample_dense(const DenseDistribution& P, Rng& rng, std::size_t m) {
    std::vector<double> cdf(P.size());
    double acc = 0;
    for (std::size_t x = 0; x < P.size(); ++x) cdf[x] = (acc += P[x]);
    SampleSetBuilder b(m, P.n());
    for (std::size_t s = 0; s < m; ++s) {
        double u = rng.uniform() * acc;
        std::size_t x = std::size_t(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        if (x >= P.size()) x = P.size() - 1;
        for (std::size_t j = 0; j < P.n(); ++j)
            if ((x >> j) & 1u) b.set(s, j, true);
    }
    return std::move(b).build();
}

} // namespace bnit
