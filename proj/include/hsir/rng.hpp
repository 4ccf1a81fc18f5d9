#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace hsir {

using Rng = std::mt19937_64;

// Derives an independent seed for substream `stream` of a master seed
// (splitmix64 finalizer over the pair).
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
    return Rng(substream_seed(seed, stream));
}

inline void fill_standard_normal(Rng& rng, std::span<double> out) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& v : out) v = normal(rng);
}

} // namespace hsir
