#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "bnit/dense.hpp"
#include "bnit/error.hpp"
#include "bnit/rng.hpp"

namespace bnit {

inline constexpr std::size_t kAuditMax = 14;

struct FarnessCertificate {
    double tv_to_prod_marginals = 0.0;
    double certified_lower_bound = 0.0;
    double empirical_min_tv = 0.0;
    ProductDistribution minimizer;
};

struct AuditOptions {
    std::size_t restarts = 20;
    double tol = 1e-6;
    std::size_t max_sweeps = 200;
    std::uint64_t seed = 0xA0D1;
    bool minimize = true;
};

namespace detail {

// dense pmf of prod_{j != skip} Bernoulli(q_j), indexed by the n-1 remaining coordinates in order
inline std::vector<double> product_without(const std::vector<double>& q, std::size_t skip) {
    std::vector<double> r(1, 1.0);
    for (std::size_t j = 0; j < q.size(); ++j) {
        if (j == skip) continue;
        std::size_t h = r.size();
        r.resize(2 * h);
        for (std::size_t c = 0; c < h; ++c) {
            r[c + h] = r[c] * q[j];
            r[c] *= 1.0 - q[j];
        }
    }
    return r;
}

inline double tv_to_product(const DenseDistribution& P, const std::vector<double>& q) {
    auto full = ProductDistribution(q).expand();
    return tv(P, full);
}

// exact minimiser over q_i of sum_y |a_y - (1-q) R_y| + |b_y - q R_y|; a weighted median
inline double best_coordinate(const DenseDistribution& P, const std::vector<double>& q, std::size_t i) {
    auto R = product_without(q, i);
    std::vector<std::pair<double, double>> pts;
    pts.reserve(2 * R.size());
    const std::size_t lowmask = (std::size_t(1) << i) - 1;
    for (std::size_t y = 0; y < R.size(); ++y) {
        if (R[y] <= 0.0) continue;
        std::size_t x0 = (y & lowmask) | ((y & ~lowmask) << 1);
        std::size_t x1 = x0 | (std::size_t(1) << i);
        pts.emplace_back(1.0 - P[x0] / R[y], R[y]);
        pts.emplace_back(P[x1] / R[y], R[y]);
    }
    if (pts.empty()) return q[i];
    std::sort(pts.begin(), pts.end());
    double total = 0;
    for (auto& p : pts) total += p.second;
    double acc = 0;
    for (auto& p : pts) {
        acc += p.second;
        if (acc >= 0.5 * total) return std::clamp(p.first, 0.0, 1.0);
    }
    return std::clamp(pts.back().first, 0.0, 1.0);
}

inline std::pair<double, std::vector<double>> descend(const DenseDistribution& P, std::vector<double> q, const AuditOptions& opt) {
    double cur = tv_to_product(P, q);
    for (std::size_t sweep = 0; sweep < opt.max_sweeps; ++sweep) {
        for (std::size_t i = 0; i < q.size(); ++i) q[i] = best_coordinate(P, q, i);
        double next = tv_to_product(P, q);
        bool done = cur - next < opt.tol;
        cur = std::min(cur, next);
        if (done) break;
    }
    return {cur, std::move(q)};
}

// pattern search along e_i +- e_j: coordinate descent stalls where two marginals must move together
inline double polish_pairs(const DenseDistribution& P, std::vector<double>& q, double cur) {
    const std::size_t n = q.size();
    double h = 0.05;
    for (std::size_t pass = 0; pass < 4000 && h > 1e-9; ++pass) {
        bool improved = false;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                for (int s = 0; s < 4; ++s) {
                    auto r = q;
                    r[i] = std::clamp(r[i] + ((s & 1) ? h : -h), 0.0, 1.0);
                    r[j] = std::clamp(r[j] + ((s & 2) ? h : -h), 0.0, 1.0);
                    double v = tv_to_product(P, r);
                    if (v < cur - 1e-15) {
                        cur = v;
                        q = std::move(r);
                        improved = true;
                    }
                }
        h = improved ? std::min(0.05, 2 * h) : h / 2;
    }
    return cur;
}

} // namespace detail

// bipartitions: blocks A (complement implied); single-coordinate splits are always included
inline FarnessCertificate farness_audit(const DenseDistribution& P, const std::vector<IndexSet>& bipartitions = {}, const AuditOptions& opt = {}) {
    if (P.n() > kAuditMax) throw Error(Errc::TooLargeForAudit, "farness audit needs n <= 14");
    FarnessCertificate cert;
    auto marg = product_of_marginals(P);
    cert.tv_to_prod_marginals = tv(P, marg.expand());
    double best_split = 0.0;
    if (P.n() >= 2) {
        for (std::size_t i = 0; i < P.n(); ++i) best_split = std::max(best_split, tv(P, block_product(P, {i})));
        for (const auto& A : bipartitions) {
            if (A.empty() || A.size() >= P.n()) continue;
            best_split = std::max(best_split, tv(P, block_product(P, A)));
        }
    }
    cert.certified_lower_bound = best_split / 3.0;
    cert.minimizer = marg;
    cert.empirical_min_tv = cert.tv_to_prod_marginals;
    if (opt.minimize && P.n() >= 2) {
        Rng rng(opt.seed, 0);
        for (std::size_t r = 0; r < opt.restarts; ++r) {
            std::vector<double> start = marg.p();
            if (r > 0)
                for (auto& v : start) v = rng.uniform();
            auto [val, q] = detail::descend(P, std::move(start), opt);
            if (val < cert.empirical_min_tv) {
                cert.empirical_min_tv = val;
                cert.minimizer = ProductDistribution(std::move(q));
            }
        }
        // alternate pair moves and coordinate sweeps from the best restart
        auto q = cert.minimizer.p();
        double cur = cert.empirical_min_tv;
        for (;;) {
            double polished = detail::polish_pairs(P, q, cur);
            auto [val, q2] = detail::descend(P, q, opt);
            double next = std::min(polished, val);
            if (val < polished) q = std::move(q2);
            bool done = cur - next < opt.tol;
            cur = next;
            if (done) break;
        }
        if (cur < cert.empirical_min_tv) {
            cert.empirical_min_tv = cur;
            cert.minimizer = ProductDistribution(q);
        }
    }
    return cert;
}

// Upper estimate of min over Q1 (x) Q2 of tv(P, Q1 (x) Q2) for the split (A, A^c), by exact
// pairwise mass-transfer line searches on both blocks from several starts, then joint
// pattern moves when both blocks are small.
inline double min_tv_two_block(const DenseDistribution& P, const IndexSet& A, std::size_t restarts, Rng& rng, std::size_t max_sweeps = 100) {
    check_index_set(A, P.n(), true);
    IndexSet B;
    for (std::size_t i = 0; i < P.n(); ++i)
        if (std::find(A.begin(), A.end(), i) == A.end()) B.push_back(i);
    const std::size_t KA = std::size_t(1) << A.size(), KB = std::size_t(1) << B.size();
    // M[a][b] = P restricted to block values
    std::vector<double> M(KA * KB, 0.0);
    for (std::size_t x = 0; x < P.size(); ++x) {
        std::size_t a = 0, b = 0;
        for (std::size_t j = 0; j < A.size(); ++j) a |= ((x >> A[j]) & 1u) << j;
        for (std::size_t j = 0; j < B.size(); ++j) b |= ((x >> B[j]) & 1u) << j;
        M[a * KB + b] += P[x];
    }
    auto objective = [&](const std::vector<double>& q1, const std::vector<double>& q2) {
        double s = 0;
        for (std::size_t a = 0; a < KA; ++a)
            for (std::size_t b = 0; b < KB; ++b) s += std::fabs(M[a * KB + b] - q1[a] * q2[b]);
        return 0.5 * s;
    };
    // move t of mass from u to v in q (the side indexed by `row`), other side fixed
    auto transfer = [](std::vector<double>& q, const std::vector<double>& other, std::size_t u, std::size_t v,
                       const std::function<double(std::size_t, std::size_t)>& mass) {
        std::vector<std::pair<double, double>> pts;
        for (std::size_t o = 0; o < other.size(); ++o) {
            if (other[o] <= 0) continue;
            // |m(v,o) - (q_v + t) w| and |m(u,o) - (q_u - t) w|
            pts.emplace_back(mass(v, o) / other[o] - q[v], other[o]);
            pts.emplace_back(q[u] - mass(u, o) / other[o], other[o]);
        }
        if (pts.empty()) return;
        std::sort(pts.begin(), pts.end());
        double total = 0, acc = 0, t = pts.back().first;
        for (auto& p : pts) total += p.second;
        for (auto& p : pts) {
            acc += p.second;
            if (acc >= 0.5 * total) {
                t = p.first;
                break;
            }
        }
        t = std::clamp(t, -q[v], q[u]);
        q[v] += t;
        q[u] -= t;
    };
    auto m1 = [&](std::size_t a, std::size_t b) { return M[a * KB + b]; };
    auto m2 = [&](std::size_t b, std::size_t a) { return M[a * KB + b]; };
    double best = 1.0;
    for (std::size_t r = 0; r < restarts; ++r) {
        std::vector<double> q1(KA, 0.0), q2(KB, 0.0);
        if (r == 0) {
            for (std::size_t a = 0; a < KA; ++a)
                for (std::size_t b = 0; b < KB; ++b) {
                    q1[a] += M[a * KB + b];
                    q2[b] += M[a * KB + b];
                }
        } else {
            double s1 = 0, s2 = 0;
            for (auto& v : q1) s1 += (v = rng.uniform() + 1e-3);
            for (auto& v : q2) s2 += (v = rng.uniform() + 1e-3);
            for (auto& v : q1) v /= s1;
            for (auto& v : q2) v /= s2;
        }
        double cur = objective(q1, q2);
        auto sweeps = [&] {
            for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
                auto s1 = q1, s2 = q2;
                for (std::size_t u = 0; u < KA; ++u)
                    for (std::size_t v = 0; v < KA; ++v)
                        if (u != v) transfer(q1, q2, u, v, m1);
                for (std::size_t u = 0; u < KB; ++u)
                    for (std::size_t v = 0; v < KB; ++v)
                        if (u != v) transfer(q2, q1, u, v, m2);
                double next = objective(q1, q2);
                if (next > cur) {
                    q1 = std::move(s1);
                    q2 = std::move(s2);
                    break;
                }
                bool done = cur - next < 1e-12;
                cur = next;
                if (done) break;
            }
        };
        // simultaneous transfers on both blocks, where alternating sweeps stall
        auto joint = [&] {
            double h = 0.05;
            for (std::size_t pass = 0; pass < 4000 && h > 1e-9; ++pass) {
                bool improved = false;
                for (std::size_t u = 0; u < KA; ++u)
                    for (std::size_t v = 0; v < KA; ++v)
                        for (std::size_t w = 0; w < KB; ++w)
                            for (std::size_t z = 0; z < KB; ++z) {
                                if (u == v || w == z) continue;
                                auto r1 = q1, r2 = q2;
                                double t1 = std::min(h, r1[u]), t2 = std::min(h, r2[w]);
                                r1[u] -= t1;
                                r1[v] += t1;
                                r2[w] -= t2;
                                r2[z] += t2;
                                double val = objective(r1, r2);
                                if (val < cur - 1e-15) {
                                    cur = val;
                                    q1 = std::move(r1);
                                    q2 = std::move(r2);
                                    improved = true;
                                }
                            }
                h = improved ? std::min(0.05, 2 * h) : h / 2;
            }
        };
        sweeps();
        if (KA * KB <= 256)
            for (;;) {
                double before = cur;
                joint();
                sweeps();
                if (before - cur < 1e-12) break;
            }
        best = std::min(best, cur);
    }
    return best;
}

// TV between the conditionals of the other coordinates given x_c = 0 and x_c = 1.
// block: the first block of the bipartition, must contain c and have uniform marginal.
inline double conditional_tv_lower_bound(const DenseDistribution& P, std::size_t coordinate, IndexSet block = {}) {
    if (coordinate >= P.n()) throw Error(Errc::IndexOutOfRange, "coordinate outside dimension");
    if (block.empty()) block = {coordinate};
    if (std::find(block.begin(), block.end(), coordinate) == block.end())
        throw Error(Errc::InvalidArgument, "block must contain the conditioning coordinate");
    auto mb = marginalize(P, block);
    double u = std::ldexp(1.0, -int(block.size()));
    for (double v : mb.mass())
        if (std::fabs(v - u) > 1e-9) throw Error(Errc::PreconditionUniform, "marginal of the first block is not uniform");
    const std::size_t bitc = std::size_t(1) << coordinate;
    double s = 0;
    // Pr[x_c = b] = 1/2, so conditional masses are 2 P(x)
    for (std::size_t x = 0; x < P.size(); ++x)
        if (!(x & bitc)) s += std::fabs(2 * P[x] - 2 * P[x | bitc]);
    return std::min(1.0, 0.5 * s);
}

} // namespace bnit
