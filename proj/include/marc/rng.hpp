#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace marc {

using Rng = std::mt19937_64;

/// Deterministic child seed from (master seed, stage name, index).
/// FNV-1a over the stage name, then a splitmix64 finalizer.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stage, std::uint64_t index = 0);

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline double standard_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

}  // namespace marc
