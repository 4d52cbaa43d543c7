#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"

#include "bnit/error.hpp"
#include "bnit/rng.hpp"

namespace bnit {

inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string calibration_key(std::uint64_t domain_size, double eps, std::uint64_t m) {
    return std::to_string(domain_size) + ":" + format_double(eps) + ":" + std::to_string(m);
}

// JSON file {"k:eps:m": tau, ...}; reads shared, writes exclusive.
class CalibrationCache {
public:
    explicit CalibrationCache(std::filesystem::path file) : file_(std::move(file)) { load(); }

    static std::filesystem::path default_dir() {
        const char* env = std::getenv("BNIT_CACHE_DIR");
        return env && *env ? std::filesystem::path(env) : std::filesystem::current_path();
    }
    static CalibrationCache from_env() { return CalibrationCache(default_dir() / "calibration.json"); }

    const std::filesystem::path& file() const { return file_; }

    std::optional<double> lookup(const std::string& key) const {
        std::shared_lock lock(mu_);
        auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }

    void store(const std::string& key, double tau) {
        std::unique_lock lock(mu_);
        entries_[key] = tau;
        nlohmann::json j = nlohmann::json::object();
        for (auto& [k, v] : entries_) j[k] = v;
        if (file_.has_parent_path()) std::filesystem::create_directories(file_.parent_path());
        auto tmp = file_;
        tmp += ".tmp";
        {
            std::ofstream out(tmp);
            out << j.dump(2) << "\n";
            if (!out) throw Error(Errc::InvalidArgument, "cannot write calibration cache " + tmp.string());
        }
        std::filesystem::rename(tmp, file_);
    }

    std::size_t size() const {
        std::shared_lock lock(mu_);
        return entries_.size();
    }

private:
    void load() {
        if (!std::filesystem::exists(file_)) return;
        std::ifstream in(file_);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::ParseError, "calibration cache " + file_.string() + ": " + e.what());
        }
        if (!j.is_object()) throw Error(Errc::ParseError, "calibration cache must be a JSON object");
        for (auto& [k, v] : j.items()) {
            if (!v.is_number()) throw Error(Errc::ParseError, "calibration cache entry " + k + " is not a number");
            entries_[k] = v.get<double>();
        }
    }

    std::filesystem::path file_;
    std::map<std::string, double> entries_;
    mutable std::shared_mutex mu_;
};

// Z for a uniform reference on K cells
inline double uniform_identity_statistic(const std::vector<std::uint64_t>& counts, double m) {
    const double K = double(counts.size());
    double z = 0.0;
    for (auto c : counts) {
        double d = double(c) - m / K;
        z += (d * d - double(c)) * K;
    }
    return z;
}

// mixture weight t so that d_H((1-t)U + t*delta_0, U) = eps; 1 when unreachable
inline double calibration_alt_weight(std::uint64_t K, double eps) {
    auto h = [K](double t) {
        double k = double(K);
        double aff = (k - 1) * std::sqrt((1 - t) / k / k) + std::sqrt(((1 - t) / k + t) / k);
        return std::sqrt(std::max(0.0, 1.0 - aff));
    };
    if (h(1.0) <= eps) return 1.0;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        (h(mid) < eps ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct CalibrationResult {
    double tau = 0.0;
    double type1 = 0.0;
    double type2 = 0.0;
    double alt_weight = 0.0;
};

namespace detail {

inline std::vector<std::uint64_t> simulate_counts(std::uint64_t K, double eps, std::uint64_t m, bool alternative, double t, Rng& rng) {
    std::vector<std::uint64_t> counts(K, 0);
    const std::uint64_t mask = K - 1;
    for (std::uint64_t s = 0; s < m; ++s) {
        std::uint64_t code;
        if (alternative) {
            code = rng.uniform() < t ? 0 : (rng.next_u32() & mask);
        } else {
            std::uint64_t first = rng.uniform() < 0.5 + 0.5 * eps ? 1 : 0;
            code = ((rng.next_u32() & mask) & ~std::uint64_t(1)) | first;
        }
        ++counts[code];
    }
    return counts;
}

inline void check_domain(std::uint64_t K) {
    if (K < 2 || (K & (K - 1)) != 0 || K > (std::uint64_t(1) << 24))
        throw Error(Errc::InvalidArgument, "calibration domain size must be a power of two in [2, 2^24]");
}

} // namespace detail

inline std::pair<double, double> calibration_errors(std::uint64_t K, double eps, std::uint64_t m, double tau, std::size_t trials, Rng& rng) {
    detail::check_domain(K);
    double t = calibration_alt_weight(K, eps);
    std::size_t fa = 0, miss = 0;
    for (std::size_t i = 0; i < trials; ++i) {
        if (uniform_identity_statistic(detail::simulate_counts(K, eps, m, false, t, rng), double(m)) > tau) ++fa;
        if (uniform_identity_statistic(detail::simulate_counts(K, eps, m, true, t, rng), double(m)) <= tau) ++miss;
    }
    return {double(fa) / double(trials), double(miss) / double(trials)};
}

inline CalibrationResult calibrate_threshold_detail(std::uint64_t K, double eps, std::uint64_t m, std::size_t trials, Rng& rng) {
    detail::check_domain(K);
    if (trials < 1000) throw Error(Errc::InvalidArgument, "calibration needs at least 1000 trials");
    if (!(eps > 0.0 && eps <= 1.0)) throw Error(Errc::InvalidEpsilon, "eps must lie in (0,1]");
    if (m == 0) throw Error(Errc::InsufficientSamples, "calibration needs m >= 1", 1);
    double t = calibration_alt_weight(K, eps);
    std::vector<double> z0(trials), z1(trials);
    for (std::size_t i = 0; i < trials; ++i) {
        z0[i] = uniform_identity_statistic(detail::simulate_counts(K, eps, m, false, t, rng), double(m));
        z1[i] = uniform_identity_statistic(detail::simulate_counts(K, eps, m, true, t, rng), double(m));
    }
    std::sort(z0.begin(), z0.end());
    std::sort(z1.begin(), z1.end());
    std::vector<double> cand;
    cand.reserve(2 * trials);
    cand.insert(cand.end(), z0.begin(), z0.end());
    cand.insert(cand.end(), z1.begin(), z1.end());
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    // accept iff Z <= tau; scan tau over [-inf, cand_0), [cand_0, cand_1), ...
    const double N = double(trials);
    double best = 2.0;
    std::size_t best_i = 0;
    for (std::size_t i = 0; i <= cand.size(); ++i) {
        double thr = i == 0 ? -INFINITY : cand[i - 1];
        double fa = double(z0.end() - std::upper_bound(z0.begin(), z0.end(), thr)) / N;
        double miss = double(std::upper_bound(z1.begin(), z1.end(), thr) - z1.begin()) / N;
        double worst = std::max(fa, miss);
        if (worst < best) {
            best = worst;
            best_i = i;
        }
    }
    CalibrationResult r;
    r.alt_weight = t;
    if (best_i == 0)
        r.tau = cand.front() - 1.0;
    else if (best_i == cand.size())
        r.tau = cand.back() + 1.0;
    else
        r.tau = 0.5 * (cand[best_i - 1] + cand[best_i]);
    r.type1 = double(z0.end() - std::upper_bound(z0.begin(), z0.end(), r.tau)) / N;
    r.type2 = double(std::upper_bound(z1.begin(), z1.end(), r.tau) - z1.begin()) / N;
    return r;
}

inline double calibrate_threshold(std::uint64_t domain_size, double eps, std::uint64_t m, std::size_t trials, Rng& rng) {
    return calibrate_threshold_detail(domain_size, eps, m, trials, rng).tau;
}

// calibrate once per key and persist; the RNG stream is a function of the key
inline double cached_threshold(CalibrationCache& cache, std::uint64_t domain_size, double eps, std::uint64_t m, std::size_t trials, std::uint64_t seed) {
    auto key = calibration_key(domain_size, eps, m);
    if (auto hit = cache.lookup(key)) return *hit;
    Rng rng(seed, hash_string(key));
    double tau = calibrate_threshold(domain_size, eps, m, trials, rng);
    cache.store(key, tau);
    return tau;
}

} // namespace bnit
