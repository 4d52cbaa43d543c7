#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "bnit/error.hpp"
#include "bnit/samples.hpp"

namespace bnit {

inline constexpr std::size_t kDenseMax = 24;

struct KahanSum {
    double sum = 0.0, c = 0.0;
    void add(double v) {
        double y = v - c;
        double t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
};

template <class Range>
double accurate_sum(const Range& r) {
    KahanSum k;
    for (double v : r) k.add(v);
    return k.sum;
}

class DenseDistribution {
public:
    DenseDistribution() = default;

    DenseDistribution(std::size_t n, std::vector<double> mass) : n_(n), mass_(std::move(mass)) {
        if (n > kDenseMax) throw Error(Errc::TooLargeForDense, "dense distributions need n <= 24");
        if (mass_.size() != (std::size_t(1) << n))
            throw Error(Errc::DimensionMismatch, "mass has " + std::to_string(mass_.size()) + " entries, expected 2^" + std::to_string(n));
        for (double v : mass_)
            if (!(v >= 0.0)) throw Error(Errc::InvalidArgument, "negative or NaN mass entry");
        double s = accurate_sum(mass_);
        if (std::fabs(s - 1.0) > 1e-12) throw Error(Errc::InvalidArgument, "mass sums to " + std::to_string(s));
    }

    static DenseDistribution normalized(std::size_t n, std::vector<double> w) {
        double s = accurate_sum(w);
        if (!(s > 0.0)) throw Error(Errc::InvalidArgument, "weights must have positive total");
        for (double& v : w) v /= s;
        return DenseDistribution(n, std::move(w));
    }

    static DenseDistribution uniform(std::size_t n) {
        return DenseDistribution(n, std::vector<double>(std::size_t(1) << n, std::ldexp(1.0, -int(n))));
    }

    std::size_t n() const { return n_; }
    std::size_t size() const { return mass_.size(); }
    const std::vector<double>& mass() const { return mass_; }
    double operator[](std::size_t code) const { return mass_[code]; }
    double at(const Assignment& x) const {
        if (x.size() != n_) throw Error(Errc::DimensionMismatch, "assignment length differs from n");
        return mass_[x.code()];
    }

private:
    std::size_t n_ = 0;
    std::vector<double> mass_{1.0};
};

class ProductDistribution {
public:
    ProductDistribution() = default;
    explicit ProductDistribution(std::vector<double> p) : p_(std::move(p)) {
        for (double v : p_)
            if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::InvalidArgument, "marginal outside [0,1]");
    }

    std::size_t n() const { return p_.size(); }
    const std::vector<double>& p() const { return p_; }
    double operator[](std::size_t i) const { return p_[i]; }

    double eval(std::uint64_t code) const {
        double v = 1.0;
        for (std::size_t i = 0; i < p_.size(); ++i) v *= ((code >> i) & 1u) ? p_[i] : 1.0 - p_[i];
        return v;
    }

    DenseDistribution expand() const {
        const std::size_t n = p_.size();
        if (n > kDenseMax) throw Error(Errc::TooLargeForDense, "product expansion needs n <= 24");
        std::vector<double> mass(std::size_t(1) << n);
        mass[0] = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t half = std::size_t(1) << i;
            for (std::size_t c = 0; c < half; ++c) {
                mass[c + half] = mass[c] * p_[i];
                mass[c] *= 1.0 - p_[i];
            }
        }
        return DenseDistribution::normalized(n, std::move(mass));
    }

private:
    std::vector<double> p_;
};

inline DenseDistribution marginalize(const DenseDistribution& P, const IndexSet& T) {
    check_index_set(T, P.n(), false);
    std::vector<double> out(std::size_t(1) << T.size(), 0.0);
    for (std::size_t x = 0; x < P.size(); ++x) {
        std::size_t y = 0;
        for (std::size_t j = 0; j < T.size(); ++j) y |= ((x >> T[j]) & 1u) << j;
        out[y] += P[x];
    }
    return DenseDistribution::normalized(T.size(), std::move(out));
}

inline ProductDistribution product_of_marginals(const DenseDistribution& P) {
    std::vector<KahanSum> acc(P.n());
    for (std::size_t x = 0; x < P.size(); ++x)
        for (std::size_t i = 0; i < P.n(); ++i)
            if ((x >> i) & 1u) acc[i].add(P[x]);
    std::vector<double> p(P.n());
    for (std::size_t i = 0; i < P.n(); ++i) p[i] = std::min(1.0, std::max(0.0, acc[i].sum));
    return ProductDistribution(std::move(p));
}

// P_A (x) P_{A^c} as a dense distribution on the original coordinates
inline DenseDistribution block_product(const DenseDistribution& P, const IndexSet& A) {
    check_index_set(A, P.n(), false);
    std::vector<char> inA(P.n(), 0);
    for (auto i : A) inA[i] = 1;
    IndexSet B;
    for (std::size_t i = 0; i < P.n(); ++i)
        if (!inA[i]) B.push_back(i);
    auto PA = marginalize(P, A);
    auto PB = marginalize(P, B);
    std::vector<double> out(P.size());
    for (std::size_t x = 0; x < P.size(); ++x) {
        std::size_t a = 0, b = 0;
        for (std::size_t j = 0; j < A.size(); ++j) a |= ((x >> A[j]) & 1u) << j;
        for (std::size_t j = 0; j < B.size(); ++j) b |= ((x >> B[j]) & 1u) << j;
        out[x] = PA[a] * PB[b];
    }
    return DenseDistribution::normalized(P.n(), std::move(out));
}

inline void require_same_dim(const DenseDistribution& P, const DenseDistribution& Q) {
    if (P.n() != Q.n()) throw Error(Errc::DimensionMismatch, "distributions have different dimensions");
}

inline double tv(const DenseDistribution& P, const DenseDistribution& Q) {
    require_same_dim(P, Q);
    KahanSum s;
    for (std::size_t x = 0; x < P.size(); ++x) s.add(std::fabs(P[x] - Q[x]));
    return std::min(1.0, 0.5 * s.sum);
}

inline double hellinger_sq(const DenseDistribution& P, const DenseDistribution& Q) {
    require_same_dim(P, Q);
    KahanSum s;
    for (std::size_t x = 0; x < P.size(); ++x) {
        double d = std::sqrt(P[x]) - std::sqrt(Q[x]);
        s.add(d * d);
    }
    return std::min(1.0, 0.5 * s.sum);
}

inline double hellinger(const DenseDistribution& P, const DenseDistribution& Q) { return std::sqrt(hellinger_sq(P, Q)); }

inline double chi2(const DenseDistribution& P, const DenseDistribution& Q) {
    require_same_dim(P, Q);
    KahanSum s;
    for (std::size_t x = 0; x < P.size(); ++x) {
        if (Q[x] == 0.0) {
            if (P[x] > 0.0) return std::numeric_limits<double>::infinity();
            continue;
        }
        double d = P[x] - Q[x];
        s.add(d * d / Q[x]);
    }
    return s.sum;
}

} // namespace bnit
