#pragma once

#include <cstdint>
#include <random>

namespace tontine {

// SplitMix64 step; used to decorrelate stream keys before seeding.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Independent generator for one (seed, stream) pair. Every Monte Carlo
// path draws only from its own stream, so results do not depend on the
// order in which paths are processed.
inline std::mt19937_64 path_stream(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t key = splitmix64(seed) ^ splitmix64(0x5851f42d4c957f2dULL + stream);
    return std::mt19937_64(splitmix64(key));
}

}  // namespace tontine
