// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <limits>
#include <span>

namespace scinsim {

/// SplitMix64: a counter-based 64-bit generator. Output k is a fixed mix of
/// `seed + (k + 1) * golden_gamma`, so streams are identical on every
/// platform. All randomness in the simulator comes from this type; the
/// standard library engines and distributions are never used.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next(); }
  std::uint64_t next();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n). Unbiased (rejection sampling). n > 0.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via the Marsaglia polar method.
  double normal();

  /// Independent child stream, stable for a given (parent seed, stream id).
  SplitMix64 fork(std::uint64_t stream) const;

  static std::uint64_t mix(std::uint64_t z);

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Fisher-Yates shuffle driven by SplitMix64 (std::shuffle's algorithm is
/// implementation-defined).
template <class T>
void deterministic_shuffle(std::span<T> values, SplitMix64& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace scinsim
