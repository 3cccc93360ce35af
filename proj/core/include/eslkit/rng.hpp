#pragma once

#include <cstdint>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

namespace esl {

// Counter-based random numbers built on splitmix64. Every draw is a pure
// function of the words mixed into its key, so scene generation and
// training are reproducible from (seed, stream, index...) tuples without
// any sequential generator state.

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Key derivation: fold `word` into `key`. Chaining mix() calls over a
/// tuple of indices yields the per-draw key.
inline constexpr std::uint64_t mix(std::uint64_t key, std::uint64_t word) {
    return splitmix64(key ^ (word + 0x9e3779b97f4a7c15ULL + (key << 6) + (key >> 2)));
}

/// Uniform double in [0, 1) from a key (53 mantissa bits).
inline double uniform01(std::uint64_t key) {
    return static_cast<double>(splitmix64(key) >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller from two derived keys.
inline double normal01(std::uint64_t key) {
    const double u1 = uniform01(mix(key, 1));
    const double u2 = uniform01(mix(key, 2));
    const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    return r * std::cos(2.0 * std::numbers::pi * u2);
}

/// Uniform integer in [0, n). n must be > 0. Uses 64-bit multiply-shift;
/// the modulo bias is < 2^-53 for the n used here and is irrelevant for
/// scene synthesis.
inline std::uint64_t uniform_below(std::uint64_t key, std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform01(key) * static_cast<double>(n));
}

/// Sequential convenience wrapper for places that want a stream (batch
/// shuffling, weight init). Still splitmix64 underneath.
class SplitMix {
public:
    explicit SplitMix(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t x = state_;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }
    double uniform() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }
    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }
    /// Fisher-Yates shuffle, pinned here so results do not depend on the
    /// standard library's std::shuffle implementation.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j =
                static_cast<std::size_t>(uniform() * static_cast<double>(i));
            std::swap(v[i - 1], v[j < i ? j : i - 1]);
        }
    }

private:
    std::uint64_t state_;
};

}  // namespace esl
