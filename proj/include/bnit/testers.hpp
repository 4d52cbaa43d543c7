#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "bnit/calibration.hpp"
#include "bnit/dense.hpp"
#include "bnit/error.hpp"
#include "bnit/rng.hpp"
#include "bnit/samples.hpp"

namespace bnit {

enum class ThresholdMode { analytic, calibrated };
enum class Verdict { accept, reject };

inline const char* verdict_name(Verdict v) { return v == Verdict::accept ? "accept" : "reject"; }

struct TesterConfig {
    double c_learn = 10.0;
    double c_test = 10.0;
    double c_amp = 4.0;
    ThresholdMode threshold_mode = ThresholdMode::analytic;
    bool poissonized = false;
    // the degree-d tester draws exactly this many samples when set; subset tests then run at the
    // resolution the budget affords
    std::optional<std::uint64_t> sample_budget;
    unsigned threads = 1;
    CalibrationCache* cache = nullptr;
    std::size_t calibration_trials = 2000;
    std::uint64_t calibration_seed = 0x5EED;

    void validate() const {
        if (!(c_learn > 0 && c_test > 0 && c_amp > 0)) throw Error(Errc::InvalidArgument, "tester constants must be positive");
        if (threshold_mode == ThresholdMode::calibrated && cache == nullptr)
            throw Error(Errc::InvalidArgument, "calibrated threshold mode needs a calibration cache");
    }
};

struct TestReport {
    Verdict verdict = Verdict::accept;
    double statistic = 0.0;
    double threshold = 0.0;
    std::optional<IndexSet> witness_subset;
    std::uint64_t samples_used = 0;
};

inline void check_eps(double eps) {
    if (!(eps > 0.0 && eps <= 1.0)) throw Error(Errc::InvalidEpsilon, "eps must lie in (0,1], got " + format_double(eps));
}

inline void check_fail_prob(double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw Error(Errc::InvalidArgument, "fail_prob must lie in (0,1)");
}

inline std::uint64_t ceil_count(double v) {
    if (!(v < 1.8e19)) throw Error(Errc::Overflow, "sample count overflows 64 bits");
    return std::uint64_t(std::ceil(v));
}

inline std::uint64_t learner_samples(std::size_t k, double eps, double c_learn) { return ceil_count(c_learn * 2.0 * double(k) / (eps * eps)); }

inline std::uint64_t identity_samples(std::size_t k, double eps, double c_test) {
    return ceil_count(c_test * std::sqrt(std::ldexp(1.0, int(k))) / (eps * eps));
}

inline std::uint64_t amplification_rounds(double fail_prob) {
    return 2 * std::uint64_t(std::ceil(9.0 * std::log(1.0 / fail_prob))) + 1;
}

// empirical marginals of samples [begin, end), clamped to [1/(4m), 1 - 1/(4m)]
inline ProductDistribution empirical_product(const SampleSet& S, std::size_t begin, std::size_t end) {
    const double m = double(end - begin);
    const double lo = 1.0 / (4.0 * m), hi = 1.0 - lo;
    std::vector<double> p(S.dim());
    for (std::size_t j = 0; j < S.dim(); ++j) p[j] = std::clamp(double(S.count_ones(j, begin, end)) / m, lo, hi);
    return ProductDistribution(std::move(p));
}

inline ProductDistribution learn_product_chi2(const SampleSet& samples, double eps, const TesterConfig& cfg = {}) {
    check_eps(eps);
    std::uint64_t need = learner_samples(samples.dim(), eps, cfg.c_learn);
    if (samples.size() < need || samples.size() == 0)
        throw Error(Errc::InsufficientSamples, "learner needs " + std::to_string(need) + " samples, got " + std::to_string(samples.size()), need);
    return empirical_product(samples, 0, samples.size());
}

inline double identity_statistic(const std::vector<std::uint64_t>& counts, const std::vector<double>& q, double m) {
    double z = 0.0;
    for (std::size_t x = 0; x < counts.size(); ++x) {
        double d = double(counts[x]) - m * q[x];
        z += (d * d - double(counts[x])) / q[x];
    }
    return z;
}

inline double identity_threshold(std::uint64_t domain, double eps, double m, const TesterConfig& cfg) {
    if (cfg.threshold_mode == ThresholdMode::analytic) return 1.5 * m * m * eps * eps;
    return cached_threshold(*cfg.cache, domain, eps, std::uint64_t(std::llround(m)), cfg.calibration_trials, cfg.calibration_seed);
}

namespace detail {

struct IdentityOutcome {
    bool reject;
    double z;
    double tau;
};

inline void check_reference(const DenseDistribution& q) {
    for (double v : q.mass())
        if (!(v > 0.0)) throw Error(Errc::ReferenceNotPositive, "reference distribution has a zero entry");
}

inline IdentityOutcome identity_on_block(const SampleSet& S, std::size_t begin, std::size_t end, const DenseDistribution& q, double eps,
                                         const TesterConfig& cfg, Rng* rng) {
    double m = double(end - begin);
    std::size_t stop = end;
    if (cfg.poissonized) {
        if (rng == nullptr) throw Error(Errc::InvalidArgument, "poissonized mode needs an rng");
        double nominal = std::max(1.0, m - std::ceil(4.0 * std::sqrt(m)));
        std::uint64_t draw = std::min<std::uint64_t>(rng->poisson(nominal), end - begin);
        stop = begin + draw;
        m = nominal;
    }
    auto counts = S.cell_counts(begin, stop);
    double z = identity_statistic(counts, q.mass(), m);
    double tau = identity_threshold(q.size(), eps, m, cfg);
    return {z > tau, z, tau};
}

} // namespace detail

inline TestReport identity_test_chi2_hellinger(const SampleSet& samples, const DenseDistribution& q, double eps, const TesterConfig& cfg = {},
                                               Rng* rng = nullptr) {
    check_eps(eps);
    cfg.validate();
    if (samples.dim() != q.n()) throw Error(Errc::DimensionMismatch, "sample dimension differs from reference dimension");
    std::uint64_t need = identity_samples(q.n(), eps, cfg.c_test);
    if (samples.size() < need || samples.size() == 0)
        throw Error(Errc::InsufficientSamples, "identity test needs " + std::to_string(need) + " samples, got " + std::to_string(samples.size()), need);
    detail::check_reference(q);
    auto out = detail::identity_on_block(samples, 0, samples.size(), q, eps, cfg, rng);
    TestReport r;
    r.verdict = out.reject ? Verdict::reject : Verdict::accept;
    r.statistic = out.z;
    r.threshold = out.tau;
    r.samples_used = samples.size();
    return r;
}

struct HellingerPlan {
    std::uint64_t m1 = 0, m2 = 0, rounds = 0;
    std::uint64_t required = 0;
};

inline HellingerPlan plan_hellinger(std::size_t k, double eps, double fail_prob, const TesterConfig& cfg) {
    HellingerPlan p;
    p.m1 = learner_samples(k, eps, cfg.c_learn);
    p.m2 = identity_samples(k, eps, cfg.c_test);
    p.rounds = amplification_rounds(fail_prob);
    p.required = p.m1 + p.m2 * p.rounds;
    return p;
}

namespace detail {

// budgeted: allow fewer samples than required by testing at a coarser distance
inline TestReport hellinger_core(const SampleSet& S, double eps, double fail_prob, const TesterConfig& cfg, Rng* rng, bool budgeted) {
    check_eps(eps);
    check_fail_prob(fail_prob);
    cfg.validate();
    TestReport rep;
    const std::size_t k = S.dim();
    if (k <= 1) return rep;  // every distribution on one coordinate is a product
    if (k > 24) throw Error(Errc::TooLargeForDense, "Hellinger tester enumerates 2^k cells, needs k <= 24");
    auto plan = plan_hellinger(k, eps, fail_prob, cfg);
    const std::uint64_t M = S.size();
    double eps_run = eps;
    if (M < plan.required) {
        if (!budgeted)
            throw Error(Errc::InsufficientSamples,
                        "Hellinger tester needs " + std::to_string(plan.required) + " samples, got " + std::to_string(M), plan.required);
        eps_run = eps * std::sqrt(double(plan.required) / double(std::max<std::uint64_t>(M, 1)));
    }
    const double share = double(plan.m1) / double(plan.required);
    const std::uint64_t L = std::uint64_t(std::floor(double(M) * share));
    const std::uint64_t B = L < M ? (M - L) / plan.rounds : 0;
    if (L == 0 || B == 0)
        throw Error(Errc::InsufficientSamples, "sample budget " + std::to_string(M) + " too small to form learning and test blocks",
                    plan.rounds + 2);
    auto qhat = empirical_product(S, 0, L).expand();
    std::uint64_t rejects = 0, accepts = 0;
    const std::uint64_t half = plan.rounds / 2;
    for (std::uint64_t j = 0; j < plan.rounds && rejects <= half && accepts <= half; ++j) {
        std::size_t b = L + j * B;
        auto out = identity_on_block(S, b, b + B, qhat, eps_run, cfg, rng);
        (out.reject ? rejects : accepts) += 1;
        rep.statistic = out.z;
        rep.threshold = out.tau;
    }
    rep.verdict = rejects > half ? Verdict::reject : Verdict::accept;
    rep.samples_used = L + B * plan.rounds;
    return rep;
}

} // namespace detail

inline TestReport hellinger_independence_test(const SampleSet& samples, double eps, double fail_prob, const TesterConfig& cfg = {},
                                              Rng* rng = nullptr) {
    return detail::hellinger_core(samples, eps, fail_prob, cfg, rng, false);
}

// samples: any callable SampleSet(Rng&, std::size_t m)
struct DegreeDPlan {
    double delta = 0.0;
    double eps_prime = 0.0;
    std::uint64_t subsets = 0;
    std::uint64_t m_formula = 0;
    HellingerPlan subset_plan;
    std::uint64_t m = 0;
};

inline std::uint64_t binom_u64(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    unsigned __int128 r = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i;
        if (r > std::numeric_limits<std::uint64_t>::max()) throw Error(Errc::Overflow, "binomial coefficient overflows 64 bits");
    }
    return std::uint64_t(r);
}

inline DegreeDPlan plan_degree_d(std::size_t n, std::size_t d, double eps, const TesterConfig& cfg) {
    check_eps(eps);
    if (d + 1 > n) throw Error(Errc::InvalidArgument, "need d + 1 <= n");
    DegreeDPlan p;
    p.subsets = binom_u64(n, d + 1);
    p.delta = 1.0 / (3.0 * double(p.subsets));
    p.eps_prime = eps / (std::sqrt(2.0 * double(n)) * (1.0 + std::sqrt(double(d + 1))));
    p.m_formula = ceil_count(cfg.c_amp * std::pow(2.0, double(d + 1) / 2.0) / (p.eps_prime * p.eps_prime) * std::log(1.0 / p.delta));
    if (d == 0) {
        p.m = p.m_formula;
        return p;
    }
    p.subset_plan = plan_hellinger(d + 1, p.eps_prime, p.delta, cfg);
    p.m = cfg.sample_budget ? *cfg.sample_budget : std::max(p.m_formula, p.subset_plan.required);
    return p;
}

// calls f(index, T) for every (d+1)-subset in lexicographic order until f returns false
template <class F>
void for_each_subset(std::size_t n, std::size_t k, F&& f) {
    IndexSet T(k);
    for (std::size_t j = 0; j < k; ++j) T[j] = j;
    std::uint64_t idx = 0;
    for (;;) {
        if (!f(idx++, T)) return;
        std::size_t j = k;
        while (j > 0 && T[j - 1] == n - k + j - 1) --j;
        if (j == 0) return;
        ++T[j - 1];
        for (std::size_t t = j; t < k; ++t) T[t] = T[t - 1] + 1;
    }
}

inline TestReport independence_test_on_samples(const SampleSet& S, std::size_t d, double eps, const TesterConfig& cfg, Rng& rng) {
    const std::size_t n = S.dim();
    auto plan = plan_degree_d(n, d, eps, cfg);
    TestReport rep;
    rep.samples_used = S.size();
    if (d == 0) return rep;
    const bool budgeted = cfg.sample_budget.has_value();
    const std::size_t k = d + 1;

    if (cfg.threads <= 1) {
        for_each_subset(n, k, [&](std::uint64_t idx, const IndexSet& T) {
            Rng sub = rng.split(idx);
            auto r = detail::hellinger_core(S.restrict(T), plan.eps_prime, plan.delta, cfg, &sub, budgeted);
            rep.statistic = r.statistic;
            rep.threshold = r.threshold;
            if (r.verdict == Verdict::reject) {
                rep.verdict = Verdict::reject;
                rep.witness_subset = T;
                return false;
            }
            return true;
        });
        return rep;
    }

    std::vector<IndexSet> all;
    all.reserve(plan.subsets);
    for_each_subset(n, k, [&](std::uint64_t, const IndexSet& T) {
        all.push_back(T);
        return true;
    });
    std::vector<TestReport> results(all.size());
    std::atomic<std::uint64_t> next{0};
    std::atomic<std::uint64_t> first_reject{std::numeric_limits<std::uint64_t>::max()};
    std::mutex err_mu;
    std::exception_ptr err;
    auto worker = [&] {
        for (;;) {
            std::uint64_t i = next.fetch_add(1);
            if (i >= all.size() || i > first_reject.load()) return;
            try {
                Rng sub = rng.split(i);
                results[i] = detail::hellinger_core(S.restrict(all[i]), plan.eps_prime, plan.delta, cfg, &sub, budgeted);
                if (results[i].verdict == Verdict::reject) {
                    std::uint64_t cur = first_reject.load();
                    while (i < cur && !first_reject.compare_exchange_weak(cur, i)) {
                    }
                }
            } catch (...) {
                std::lock_guard lock(err_mu);
                if (!err) err = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < cfg.threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
    std::uint64_t fr = first_reject.load();
    std::uint64_t last = fr < all.size() ? fr : all.size() - 1;
    rep.statistic = results[last].statistic;
    rep.threshold = results[last].threshold;
    if (fr < all.size()) {
        rep.verdict = Verdict::reject;
        rep.witness_subset = all[fr];
    }
    return rep;
}

template <class Sampler>
TestReport independence_test_degree_d(Sampler&& sampler, std::size_t n, std::size_t d, double eps, const TesterConfig& cfg, Rng& rng) {
    cfg.validate();
    auto plan = plan_degree_d(n, d, eps, cfg);
    if (d == 0) {
        TestReport rep;
        rep.samples_used = 0;
        return rep;
    }
    Rng draw = rng.split(0);
    SampleSet S = sampler(draw, std::size_t(plan.m));
    if (S.size() != plan.m || S.dim() != n) throw Error(Errc::DimensionMismatch, "sampler returned the wrong shape");
    Rng tests = rng.split(1);
    return independence_test_on_samples(S, d, eps, cfg, tests);
}

} // namespace bnit
