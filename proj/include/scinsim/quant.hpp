// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace scinsim {

/// Block-wise symmetric quantization parameters.
struct QuantBlockSpec {
  std::uint32_t block_size = 64;
  int bits = 8;                  // 4 or 8
  std::uint32_t scale_bytes = 2;  // fp16 or fp32 scales

  int qmax() const { return (1 << (bits - 1)) - 1; }
  void validate() const;
};

struct QuantizedTensor {
  std::vector<std::int8_t> codes;
  std::vector<float> scales;  // one per block, already rounded to the scale format
  std::vector<std::size_t> shape;
  QuantBlockSpec spec;

  std::size_t size() const { return codes.size(); }
};

/// Rounds a scale to its storage format. fp16 scales that underflow are
/// clamped to the smallest subnormal, ones that overflow to the largest
/// finite value.
float round_scale(float scale, std::uint32_t scale_bytes);
std::uint16_t scale_to_bits16(float scale);

/// x / scale rounded half away from zero, saturated to [-qmax, qmax].
std::int8_t quantize_value(float x, float scale, int qmax);

/// Quantizes one block in place into `codes`; returns the block's scale.
/// An all-zero block gets scale 1.
float quantize_block(const float* x, std::size_t n, const QuantBlockSpec& spec, std::int8_t* codes);

/// Throws std::invalid_argument naming the first non-finite element.
QuantizedTensor quantize(std::span<const float> x, const QuantBlockSpec& spec, std::vector<std::size_t> shape = {});
std::vector<float> dequantize(const QuantizedTensor& q);
inline float dequantize_value(std::int8_t code, float scale) { return static_cast<float>(code) * scale; }

struct QuantPathResult {
  std::vector<float> output;
  /// Quantization events applied on each element's path.
  std::vector<std::uint32_t> events;
};

/// Quantize every input once, dequantize, sum with the fixed tree,
/// quantize the sum once, dequantize.
QuantPathResult simulate_inq_path(const std::vector<std::vector<float>>& inputs, const QuantBlockSpec& spec);
/// The same inputs quantized at every hop of a ring reduce-scatter, then
/// once more for the all-gather.
QuantPathResult simulate_rq_path(const std::vector<std::vector<float>>& inputs, const QuantBlockSpec& spec);

/// (block x source width) / (block x code width + scale width), in bytes.
double compression_ratio(std::uint32_t block_size, double source_bytes, double code_bytes, double scale_bytes);
double compression_ratio(const QuantBlockSpec& spec, double source_bytes = 2.0);

double mean_squared_error(std::span<const float> a, std::span<const double> reference);

struct ErrorTrial {
  std::uint64_t seed = 0;
  int n = 0;
  int bits = 8;
  std::uint32_t block = 64;
  double mse_inq = 0.0;
  double mse_rq = 0.0;
};

/// One Gaussian(0,1) trial with `n` inputs of `elements` values each.
ErrorTrial run_error_trial(std::uint64_t seed, int n, std::size_t elements, const QuantBlockSpec& spec);

}  // namespace scinsim
