#pragma once

#include <cstdint>
#include <random>

namespace ctmar {

/// SplitMix64 finalizer. Used to derive independent, counter-addressable
/// RNG streams so parallel generation stays deterministic.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Stream `stream`, element `idx` of the generator family rooted at `seed`.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t idx = 0) {
    return splitmix64(splitmix64(seed ^ (0xa0761d6478bd642fULL * stream)) + idx);
}

inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream, std::uint64_t idx = 0) {
    return std::mt19937_64(mix_seed(seed, stream, idx));
}

}  // namespace ctmar
