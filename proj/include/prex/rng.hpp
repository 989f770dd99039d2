#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "prex/errors.hpp"

namespace prex {

// SplitMix64 mixer; used to derive independent substream seeds from
// (seed, index) pairs so parallel evaluation stays reproducible.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(seed ^ splitmix64(0x9E3779B97F4A7C15ull + index));
}

// The helpers below avoid std::uniform_*_distribution so generated mask
// sequences are bit-identical across standard library implementations.

/// Uniform integer in [0, n). Rejection sampling, no modulo bias.
inline std::uint64_t uniform_below(std::mt19937_64& gen, std::uint64_t n) {
    if (n == 0) throw InvalidArgument("uniform_below: n must be positive");
    const std::uint64_t bucket = std::numeric_limits<std::uint64_t>::max() / n;
    const std::uint64_t limit = bucket * n;
    std::uint64_t x;
    do {
        x = gen();
    } while (x >= limit);
    return x / bucket;
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

inline bool bernoulli(std::mt19937_64& gen, double p) { return uniform_unit(gen) < p; }

/// Uniform random permutation of 0..n-1 (Fisher-Yates).
inline std::vector<int> random_permutation(std::mt19937_64& gen, int n) {
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(uniform_below(gen, static_cast<std::uint64_t>(i) + 1));
        std::swap(perm[i], perm[j]);
    }
    return perm;
}

}  // namespace prex
