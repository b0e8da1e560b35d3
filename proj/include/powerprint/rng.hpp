#pragma once

#include <cstdint>
#include <random>

namespace powerprint {

using Seed = std::uint64_t;
using Rng = std::mt19937_64;

inline constexpr Seed kDefaultSeed = 20170601;

/// Child seed for an independent stream; SplitMix64 mixing of (parent, stream).
constexpr Seed derive_seed(Seed parent, std::uint64_t stream) noexcept {
  std::uint64_t z = parent + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr Seed derive_seed(Seed parent, std::uint64_t a, std::uint64_t b) noexcept {
  return derive_seed(derive_seed(parent, a), b);
}

}  // namespace powerprint
