// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace scinsim {

/// IEEE binary16 <-> binary32, round-to-nearest-even.
std::uint16_t float_to_half(float f);
float half_to_float(std::uint16_t h);

inline float round_to_half(float f) { return half_to_float(float_to_half(f)); }

constexpr float kHalfMax = 65504.0f;
constexpr std::uint16_t kHalfMinSubnormalBits = 0x0001;

}  // namespace scinsim
