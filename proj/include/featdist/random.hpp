#pragma once

// Portable seeded randomness. Every random choice in the engine goes through
// these routines so that a (seed, n, m) triple selects the same rows on any
// platform and in any reimplementation:
//
//   state  = four successive SplitMix64 outputs starting from `seed`
//   stream = xoshiro256** over that state
//   bounded(r): t = (2^64 - r) mod r; draw u until u >= t; return u mod r
//   select(n, m, seed): idx = [0, n); for i in [0, m): j = i + bounded(n - i);
//                       swap(idx[i], idx[j]); return sort(idx[0..m))

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <numbers>
#include <vector>

namespace featdist {

class SplitMix64 {
public:
    explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    constexpr std::uint64_t next() noexcept {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

class Xoshiro256StarStar {
public:
    using result_type = std::uint64_t;

    explicit constexpr Xoshiro256StarStar(std::uint64_t seed) noexcept {
        SplitMix64 sm(seed);
        for (auto& word : s_) {
            word = sm.next();
        }
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    constexpr result_type operator()() noexcept { return next(); }

    constexpr std::uint64_t next() noexcept {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform integer in [0, range) by rejection; range must be > 0.
    constexpr std::uint64_t bounded(std::uint64_t range) noexcept {
        const std::uint64_t threshold = (0 - range) % range;
        for (;;) {
            const std::uint64_t u = next();
            if (u >= threshold) {
                return u % range;
            }
        }
    }

    /// Uniform double in [0, 1) with 53 random bits.
    constexpr double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> s_{};
};

/// Derives an independent stream seed from a base seed and a tag.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept {
    SplitMix64 sm(seed ^ (tag * 0xd1b54a32d192ed03ULL));
    return sm.next();
}

/// m distinct indices out of [0, n), sorted ascending. Requires m <= n.
inline std::vector<std::size_t> select_indices(std::size_t n, std::size_t m, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Xoshiro256StarStar rng(seed);
    for (std::size_t i = 0; i < m; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.bounded(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(m);
    std::sort(idx.begin(), idx.end());
    return idx;
}

/// Full Fisher–Yates permutation of [0, n) driven by the same stream.
inline std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Xoshiro256StarStar rng(seed);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.bounded(n - i));
        std::swap(idx[i], idx[j]);
    }
    return idx;
}

/// Standard normal draws via Box–Muller. Used for fixtures and tests.
class NormalSampler {
public:
    explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}

    double operator()() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - rng_.uniform(); // (0, 1]
        const double u2 = rng_.uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    Xoshiro256StarStar rng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace featdist
