#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "critgrad/numerics.hpp"

namespace critgrad {

/// Deterministic, seedable random source.
///
/// Generator: xoshiro256** (Blackman & Vigna) with its 256-bit state filled
/// from the 64-bit seed by four successive SplitMix64 outputs. Doubles in
/// [0, 1) take the top 53 bits of one draw. Standard normals use the basic
/// Box-Muller transform on two fresh uniforms and return the cosine branch
/// only, so every normal consumes exactly two raw draws and no hidden spare is
/// cached. The stream for a given seed is therefore fixed by this file alone,
/// independent of the standard library implementation.
class RandomState {
 public:
  explicit RandomState(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1).
  double uniform() noexcept;
  /// Uniform integer in [0, n); n must be positive.
  std::size_t uniform_index(std::size_t n);
  /// True with probability p (p clamped to [0, 1]).
  bool bernoulli(double p) noexcept;
  double standard_normal() noexcept;

  /// Independent stream derived from this state's seed and a stream id.
  /// Does not advance this state.
  RandomState fork(std::uint64_t stream) const noexcept;

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
};

/// i.i.d. N(0, sigma²) vector of dimension d; throws for sigma < 0 or d == 0.
Vector gaussian(RandomState& rs, std::size_t d, double sigma);

}  // namespace critgrad
