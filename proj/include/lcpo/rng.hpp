#pragma once

#include <cstdint>
#include <random>

namespace lcpo {

/// Uniform double in [0, 1) from the top 53 bits of one generator draw.
/// Used instead of std::uniform_real_distribution so sampled artifacts are
/// byte-identical across standard libraries.
inline double uniform53(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// SplitMix64 step. Feeding one root seed through successive steps yields
/// the independent sub-seeds handed to each pipeline stage.
inline uint64_t splitmix64_next(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace lcpo
