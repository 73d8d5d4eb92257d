#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace soar {

// mt19937_64 is fully specified by the standard, so trajectories are identical
// across toolchains as long as we avoid the implementation-defined
// std::*_distribution adaptors. The helpers below are used instead.
using Rng = std::mt19937_64;

/// SplitMix64 finaliser.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Derives an independent stream seed from a base seed and a path of indices,
/// e.g. derive_seed(run_seed, {outer_step, k, j}).
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) noexcept;

inline Rng make_rng(std::uint64_t seed) { return Rng(mix64(seed)); }

/// Uniform double in [0, 1) with 53 random bits.
double uniform01(Rng& rng) noexcept;

/// Uniform double in [lo, hi).
double uniform(Rng& rng, double lo, double hi) noexcept;

/// Unbiased integer in [0, n). n must be positive.
std::size_t uniform_index(Rng& rng, std::size_t n);

bool bernoulli(Rng& rng, double p) noexcept;

/// Standard normal via Box-Muller.
double standard_normal(Rng& rng) noexcept;

}  // namespace soar
