#pragma once

#include <cstdint>
#include <random>

namespace pnlos {

/// splitmix64 step; decorrelates derived seeds.
inline uint64_t mix_seed(uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Deterministic sub-seed for a (master, index) pair, independent of the
/// order the indices are consumed in.
inline uint64_t derive_seed(uint64_t master, uint64_t index) {
    return mix_seed(mix_seed(master) ^ mix_seed(index + 1));
}

inline std::mt19937_64 make_rng(uint64_t seed) { return std::mt19937_64(mix_seed(seed)); }

} // namespace pnlos
