#pragma once

#include <cstdint>
#include <random>

namespace mlgc::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stable sub-stream derivation: mixing the base seed with salts keeps
// independent components (init, noise, per-class batches, ...) from
// consuming each other's draws.
template <typename... Salts>
std::uint64_t derive(std::uint64_t seed, Salts... salts) {
    std::uint64_t h = splitmix64(seed);
    ((h = splitmix64(h ^ static_cast<std::uint64_t>(salts))), ...);
    return h;
}

inline std::mt19937_64 engine(std::uint64_t seed) {
    return std::mt19937_64(splitmix64(seed));
}

}  // namespace mlgc::rng
