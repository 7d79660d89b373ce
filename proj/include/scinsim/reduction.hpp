// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>

namespace scinsim {

/// Sums `v` with a fixed pairwise tree: adjacent pairs are added level by
/// level, an odd trailing element is carried up unchanged. Overwrites `v`.
template <class T>
T tree_reduce(std::span<T> v) {
  std::size_t n = v.size();
  if (n == 0) return T{};
  while (n > 1) {
    const std::size_t half = n / 2;
    for (std::size_t i = 0; i < half; ++i) v[i] = v[2 * i] + v[2 * i + 1];
    if (n % 2 != 0) v[half] = v[n - 1];
    n = half + n % 2;
  }
  return v[0];
}

}  // namespace scinsim
