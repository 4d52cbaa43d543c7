#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>

namespace bnit {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
    return splitmix64(h ^ splitmix64(v + 0x632BE59BD9B4E019ULL));
}

inline std::uint64_t hash_string(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return splitmix64(h);
}

// Philox4x32-10 block function.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        std::uint64_t p0 = std::uint64_t(M0) * ctr[0];
        std::uint64_t p1 = std::uint64_t(M1) * ctr[2];
        ctr = {std::uint32_t(p1 >> 32) ^ ctr[1] ^ key[0], std::uint32_t(p1),
               std::uint32_t(p0 >> 32) ^ ctr[3] ^ key[1], std::uint32_t(p0)};
        key[0] += W0;
        key[1] += W1;
    }
    return ctr;
}

struct RngState {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    bool operator==(const RngState&) const = default;
};

// Counter-based generator: output word k of stream (seed, stream) is a pure
// function of k, so seeking is O(1).
class Rng {
public:
    using result_type = std::uint64_t;

    Rng() = default;
    explicit Rng(RngState s) : state_(s) {}
    Rng(std::uint64_t seed, std::uint64_t stream) : state_{seed, stream} {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    const RngState& state() const { return state_; }
    std::uint64_t position() const { return pos_; }
    void seek(std::uint64_t index) { pos_ = index; }

    std::uint32_t next_u32() {
        std::uint64_t block = pos_ >> 2;
        if (block != cached_block_ || !cached_) refill(block);
        return buf_[pos_++ & 3];
    }

    std::uint64_t next_u64() {
        std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    result_type operator()() { return next_u64(); }

    // uniform in [0,1) with 53 random bits
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    // uniform integer in [0, bound), bound > 0
    std::uint64_t below(std::uint64_t bound) {
        unsigned __int128 prod = static_cast<unsigned __int128>(next_u64()) * bound;
        std::uint64_t low = std::uint64_t(prod);
        if (low < bound) {
            std::uint64_t thresh = (0 - bound) % bound;
            while (low < thresh) {
                prod = static_cast<unsigned __int128>(next_u64()) * bound;
                low = std::uint64_t(prod);
            }
        }
        return std::uint64_t(prod >> 64);
    }

    double normal() {
        // Box-Muller, one output per call
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    std::uint64_t poisson(double lambda);

    Rng split(std::uint64_t child) const { return Rng(state_.seed, hash_combine(state_.stream, child)); }

private:
    void refill(std::uint64_t block) {
        std::array<std::uint32_t, 4> ctr = {std::uint32_t(block), std::uint32_t(block >> 32),
                                            std::uint32_t(state_.stream), std::uint32_t(state_.stream >> 32)};
        buf_ = philox4x32(ctr, {std::uint32_t(state_.seed), std::uint32_t(state_.seed >> 32)});
        cached_block_ = block;
        cached_ = true;
    }

    RngState state_{};
    std::uint64_t pos_ = 0;
    std::uint64_t cached_block_ = 0;
    bool cached_ = false;
    std::array<std::uint32_t, 4> buf_{};
};

inline std::uint64_t Rng::poisson(double lambda) {
    if (!(lambda > 0.0)) return 0;
    if (lambda < 30.0) {
        double limit = std::exp(-lambda), prod = uniform();
        std::uint64_t k = 0;
        while (prod > limit) {
            prod *= uniform();
            ++k;
        }
        return k;
    }
    // PTRS (Hormann 1993)
    double slam = std::sqrt(lambda), loglam = std::log(lambda);
    double b = 0.931 + 2.53 * slam;
    double a = -0.059 + 0.02483 * b;
    double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    double vr = 0.9277 - 3.6224 / (b - 2);
    for (;;) {
        double u = uniform() - 0.5;
        double v = uniform();
        double us = 0.5 - std::fabs(u);
        double k = std::floor((2 * a / us + b) * u + lambda + 0.43);
        if (us >= 0.07 && v <= vr) return std::uint64_t(k);
        if (k < 0 || (us < 0.013 && v > us)) continue;
        if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
            -lambda + k * loglam - std::lgamma(k + 1))
            return std::uint64_t(k);
    }
}

} // namespace bnit
