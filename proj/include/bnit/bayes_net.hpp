#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "bnit/dense.hpp"
#include "bnit/error.hpp"
#include "bnit/rng.hpp"
#include "bnit/samples.hpp"

namespace bnit {

inline constexpr std::size_t kMaxNodes = std::size_t(1) << 16;

class BayesNet {
public:
    BayesNet() = default;

    // cpt[i][pi] = Pr[X_i = 1 | parents = pi], pi bit j = value of parents[i][j]
    BayesNet(std::size_t n, std::vector<std::size_t> order, std::vector<IndexSet> parents, std::vector<std::vector<double>> cpt)
        : n_(n), order_(std::move(order)), parents_(std::move(parents)), cpt_(std::move(cpt)) {
        validate();
    }

    static BayesNet isolated(std::vector<double> p) {
        std::size_t n = p.size();
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::vector<std::vector<double>> cpt;
        for (double v : p) cpt.push_back({v});
        return BayesNet(n, std::move(order), std::vector<IndexSet>(n), std::move(cpt));
    }

    std::size_t n() const { return n_; }
    const std::vector<std::size_t>& order() const { return order_; }
    const std::vector<IndexSet>& parents() const { return parents_; }
    const IndexSet& parents(std::size_t i) const { return parents_[i]; }
    const std::vector<std::vector<double>>& cpt() const { return cpt_; }
    const std::vector<double>& cpt(std::size_t i) const { return cpt_[i]; }
    std::size_t max_in_degree() const { return max_deg_; }

    bool same_structure(const BayesNet& o) const { return n_ == o.n_ && order_ == o.order_ && parents_ == o.parents_; }

    double eval_pmf(const Assignment& x) const {
        if (x.size() != n_) throw Error(Errc::DimensionMismatch, "assignment has length " + std::to_string(x.size()) + ", net has " + std::to_string(n_) + " nodes");
        double v = 1.0;
        for (std::size_t i = 0; i < n_; ++i) {
            std::size_t pi = 0;
            for (std::size_t j = 0; j < parents_[i].size(); ++j) pi |= std::size_t(x[parents_[i][j]]) << j;
            double p1 = cpt_[i][pi];
            v *= x[i] ? p1 : 1.0 - p1;
        }
        return v;
    }

    DenseDistribution to_dense() const {
        if (n_ > kDenseMax) throw Error(Errc::TooLargeForDense, "n = " + std::to_string(n_) + " exceeds the dense cap of 24");
        std::vector<double> mass(std::size_t(1) << n_);
        for (std::size_t x = 0; x < mass.size(); ++x) {
            double v = 1.0;
            for (std::size_t i = 0; i < n_ && v != 0.0; ++i) {
                std::size_t pi = 0;
                const auto& par = parents_[i];
                for (std::size_t j = 0; j < par.size(); ++j) pi |= ((x >> par[j]) & 1u) << j;
                double p1 = cpt_[i][pi];
                v *= ((x >> i) & 1u) ? p1 : 1.0 - p1;
            }
            mass[x] = v;
        }
        return DenseDistribution(n_, std::move(mass));
    }

    // Ancestral sampling. Draw index of node i in sample s is base + s*n + i.
    SampleSet sample(Rng& rng, std::size_t m) const {
        SampleSetBuilder b(m, n_);
        std::vector<std::size_t> offset(n_ + 1, 0);
        for (std::size_t i = 0; i < n_; ++i) offset[i + 1] = offset[i] + cpt_[i].size();
        // Pr[u < t] = t / 2^32 for u uniform 32-bit; t = 2^32 needs 33 bits
        std::vector<std::uint64_t> thresh(offset[n_]);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t k = 0; k < cpt_[i].size(); ++k)
                thresh[offset[i] + k] = std::uint64_t(std::llround(std::ldexp(cpt_[i][k], 32)));
        std::vector<std::uint8_t> cur(n_);
        std::vector<std::uint64_t*> cols(n_);
        for (std::size_t j = 0; j < n_; ++j) cols[j] = b.column(j).data();
        const std::uint64_t base = rng.position();
        std::vector<std::uint32_t> u(n_);
        for (std::size_t s = 0; s < m; ++s) {
            for (std::size_t i = 0; i < n_; ++i) u[i] = rng.next_u32();
            for (std::size_t i : order_) {
                std::size_t pi = 0;
                const auto& par = parents_[i];
                for (std::size_t j = 0; j < par.size(); ++j) pi |= std::size_t(cur[par[j]]) << j;
                std::uint8_t v = std::uint64_t(u[i]) < thresh[offset[i] + pi];
                cur[i] = v;
                if (v) cols[i][s >> 6] |= std::uint64_t(1) << (s & 63);
            }
        }
        rng.seek(base + std::uint64_t(m) * n_);
        return std::move(b).build();
    }

    std::vector<Assignment> sample_list(Rng& rng, std::size_t m) const {
        auto S = sample(rng, m);
        std::vector<Assignment> out;
        out.reserve(m);
        for (std::size_t s = 0; s < m; ++s) out.push_back(S.at(s));
        return out;
    }

private:
    void validate() {
        if (n_ == 0 || n_ > kMaxNodes) throw Error(Errc::InvalidNet, "node count must be in [1, 65536]");
        if (order_.size() != n_ || parents_.size() != n_ || cpt_.size() != n_)
            throw Error(Errc::InvalidNet, "order, parents and cpt must each have n entries");
        std::vector<std::size_t> pos(n_, n_);
        for (std::size_t t = 0; t < n_; ++t) {
            if (order_[t] >= n_ || pos[order_[t]] != n_) throw Error(Errc::InvalidNet, "order is not a permutation of the nodes");
            pos[order_[t]] = t;
        }
        max_deg_ = 0;
        for (std::size_t i = 0; i < n_; ++i) {
            const auto& par = parents_[i];
            if (par.size() > 30) throw Error(Errc::InvalidNet, "in-degree above 30 is not supported");
            IndexSet s = par;
            std::sort(s.begin(), s.end());
            if (std::adjacent_find(s.begin(), s.end()) != s.end()) throw Error(Errc::InvalidNet, "duplicate parent");
            for (auto p : par) {
                if (p >= n_) throw Error(Errc::InvalidNet, "parent index out of range");
                if (pos[p] >= pos[i]) throw Error(Errc::InvalidNet, "parent " + std::to_string(p) + " does not precede node " + std::to_string(i) + " in the order");
            }
            if (cpt_[i].size() != (std::size_t(1) << par.size()))
                throw Error(Errc::InvalidNet, "cpt of node " + std::to_string(i) + " must have 2^|parents| entries");
            for (double v : cpt_[i])
                if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::InvalidNet, "cpt entry outside [0,1]");
            max_deg_ = std::max(max_deg_, par.size());
        }
    }

    std::size_t n_ = 0;
    std::vector<std::size_t> order_;
    std::vector<IndexSet> parents_;
    std::vector<std::vector<double>> cpt_;
    std::size_t max_deg_ = 0;
};

inline double eval_pmf(const BayesNet& net, const Assignment& x) { return net.eval_pmf(x); }
inline DenseDistribution to_dense(const BayesNet& net) { return net.to_dense(); }

inline std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);
    return p;
}

// uniformly random k-subset of [n], sorted
inline IndexSet random_subset(std::size_t n, std::size_t k, Rng& rng) {
    IndexSet s;
    // Floyd's algorithm
    std::vector<char> taken(n, 0);
    for (std::size_t j = n - k; j < n; ++j) {
        std::size_t t = rng.below(j + 1);
        if (taken[t]) t = j;
        taken[t] = 1;
    }
    for (std::size_t i = 0; i < n; ++i)
        if (taken[i]) s.push_back(i);
    return s;
}

struct RandomNetOptions {
    double cpt_lo = 0.0;
    double cpt_hi = 1.0;
    bool product_cpt = false;  // cpt constant across parent configurations
    bool exact_degree = false; // every node with enough predecessors gets exactly d parents
};

inline BayesNet random_bayes_net(std::size_t n, std::size_t d, Rng& rng, const RandomNetOptions& opt = {}) {
    auto order = random_permutation(n, rng);
    std::vector<IndexSet> parents(n);
    std::vector<std::vector<double>> cpt(n);
    for (std::size_t t = 0; t < n; ++t) {
        std::size_t node = order[t];
        std::size_t maxk = std::min(d, t);
        std::size_t k = opt.exact_degree ? maxk : rng.below(maxk + 1);
        IndexSet pick = random_subset(t, k, rng);
        for (auto q : pick) parents[node].push_back(order[q]);
        std::sort(parents[node].begin(), parents[node].end());
        std::size_t cells = std::size_t(1) << k;
        double shared = opt.cpt_lo + (opt.cpt_hi - opt.cpt_lo) * rng.uniform();
        for (std::size_t c = 0; c < cells; ++c)
            cpt[node].push_back(opt.product_cpt ? shared : opt.cpt_lo + (opt.cpt_hi - opt.cpt_lo) * rng.uniform());
    }
    return BayesNet(n, std::move(order), std::move(parents), std::move(cpt));
}

// Random DAG of in-degree <= d whose CPTs ignore the parents: a product distribution.
inline BayesNet random_product_net(std::size_t n, std::size_t d, Rng& rng, double lo = 0.1, double hi = 0.9) {
    RandomNetOptions opt;
    opt.cpt_lo = lo;
    opt.cpt_hi = hi;
    opt.product_cpt = true;
    return random_bayes_net(n, d, rng, opt);
}

} // namespace bnit
