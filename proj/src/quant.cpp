// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "scinsim/quant.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "scinsim/half.hpp"
#include "scinsim/reduction.hpp"
#include "scinsim/rng.hpp"

namespace scinsim {

void QuantBlockSpec::validate() const {
  if (block_size == 0) throw std::invalid_argument("quantization block size must be positive");
  if (bits != 4 && bits != 8) throw std::invalid_argument("quantization bits must be 4 or 8");
  if (scale_bytes != 0 && scale_bytes != 2 && scale_bytes != 4) {
    throw std::invalid_argument("scale width must be 2 or 4 bytes");
  }
}

float round_scale(float scale, std::uint32_t scale_bytes) {
  if (scale_bytes != 2) return scale;
  if (scale > kHalfMax) return kHalfMax;
  const float r = round_to_half(scale);
  if (r == 0.0f) return half_to_float(kHalfMinSubnormalBits);
  return r;
}

std::uint16_t scale_to_bits16(float scale) { return float_to_half(scale); }

std::int8_t quantize_value(float x, float scale, int qmax) {
  const float r = std::round(x / scale);
  const float q = std::clamp(r, static_cast<float>(-qmax), static_cast<float>(qmax));
  return static_cast<std::int8_t>(q);
}

float quantize_block(const float* x, std::size_t n, const QuantBlockSpec& spec, std::int8_t* codes) {
  float max_abs = 0.0f;
  for (std::size_t i = 0; i < n; ++i) max_abs = std::max(max_abs, std::fabs(x[i]));
  if (max_abs == 0.0f) {
    std::fill(codes, codes + n, std::int8_t{0});
    return 1.0f;
  }
  const int qmax = spec.qmax();
  const float scale = round_scale(max_abs / static_cast<float>(qmax), spec.scale_bytes);
  for (std::size_t i = 0; i < n; ++i) codes[i] = quantize_value(x[i], scale, qmax);
  return scale;
}

QuantizedTensor quantize(std::span<const float> x, const QuantBlockSpec& spec, std::vector<std::size_t> shape) {
  spec.validate();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) throw std::invalid_argument("non-finite input at index " + std::to_string(i));
  }
  QuantizedTensor q;
  q.spec = spec;
  q.shape = shape.empty() ? std::vector<std::size_t>{x.size()} : std::move(shape);
  q.codes.resize(x.size());
  const std::size_t blocks = (x.size() + spec.block_size - 1) / spec.block_size;
  q.scales.resize(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t lo = b * spec.block_size;
    const std::size_t n = std::min<std::size_t>(spec.block_size, x.size() - lo);
    q.scales[b] = quantize_block(x.data() + lo, n, spec, q.codes.data() + lo);
  }
  return q;
}

std::vector<float> dequantize(const QuantizedTensor& q) {
  std::vector<float> out(q.codes.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = dequantize_value(q.codes[i], q.scales[i / q.spec.block_size]);
  return out;
}

namespace {

void check_inputs(const std::vector<std::vector<float>>& inputs) {
  if (inputs.size() < 2) throw std::invalid_argument("at least two inputs are required");
  for (const auto& in : inputs) {
    if (in.size() != inputs.front().size()) throw std::invalid_argument("input shapes differ");
  }
}

/// Quantize-dequantize of x[lo, hi), counting one event per element.
void requantize_range(std::vector<float>& x, std::size_t lo, std::size_t hi, const QuantBlockSpec& spec,
                      std::vector<std::uint32_t>& events) {
  std::vector<std::int8_t> codes(spec.block_size);
  for (std::size_t b = lo; b < hi; b += spec.block_size) {
    const std::size_t n = std::min<std::size_t>(spec.block_size, hi - b);
    const float scale = quantize_block(x.data() + b, n, spec, codes.data());
    for (std::size_t i = 0; i < n; ++i) {
      x[b + i] = dequantize_value(codes[i], scale);
      ++events[b + i];
    }
  }
}

}  // namespace

QuantPathResult simulate_inq_path(const std::vector<std::vector<float>>& inputs, const QuantBlockSpec& spec) {
  spec.validate();
  check_inputs(inputs);
  const std::size_t e = inputs.front().size();
  QuantPathResult r;
  r.events.assign(e, 0);
  std::vector<std::vector<float>> deq;
  deq.reserve(inputs.size());
  for (const auto& in : inputs) deq.push_back(dequantize(quantize(in, spec)));
  for (auto& c : r.events) c += 1;  // every source value is quantized once
  r.output.resize(e);
  std::vector<float> lane(inputs.size());
  for (std::size_t i = 0; i < e; ++i) {
    for (std::size_t k = 0; k < inputs.size(); ++k) lane[k] = deq[k][i];
    r.output[i] = tree_reduce(std::span<float>(lane));
  }
  requantize_range(r.output, 0, e, spec, r.events);
  return r;
}

QuantPathResult simulate_rq_path(const std::vector<std::vector<float>>& inputs, const QuantBlockSpec& spec) {
  spec.validate();
  check_inputs(inputs);
  const std::size_t n = inputs.size();
  const std::size_t e = inputs.front().size();
  const std::size_t blocks = (e + spec.block_size - 1) / spec.block_size;
  const std::size_t chunk = (blocks + n - 1) / n * spec.block_size;
  QuantPathResult r;
  r.events.assign(e, 0);
  r.output.assign(e, 0.0f);
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t lo = std::min(e, c * chunk);
    const std::size_t hi = std::min(e, lo + chunk);
    if (lo == hi) continue;
    std::copy(inputs[c].begin() + lo, inputs[c].begin() + hi, r.output.begin() + lo);
    for (std::size_t k = 1; k < n; ++k) {
      requantize_range(r.output, lo, hi, spec, r.events);  // sent to the next node
      const auto& local = inputs[(c + k) % n];
      for (std::size_t i = lo; i < hi; ++i) r.output[i] = local[i] + r.output[i];
    }
    requantize_range(r.output, lo, hi, spec, r.events);  // all-gather
  }
  return r;
}

double compression_ratio(std::uint32_t block_size, double source_bytes, double code_bytes, double scale_bytes) {
  return block_size * source_bytes / (block_size * code_bytes + scale_bytes);
}

double compression_ratio(const QuantBlockSpec& spec, double source_bytes) {
  return compression_ratio(spec.block_size, source_bytes, spec.bits / 8.0, spec.scale_bytes);
}

double mean_squared_error(std::span<const float> a, std::span<const double> reference) {
  if (a.size() != reference.size()) throw std::invalid_argument("size mismatch");
  if (a.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - reference[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

ErrorTrial run_error_trial(std::uint64_t seed, int n, std::size_t elements, const QuantBlockSpec& spec) {
  SplitMix64 rng(seed);
  std::vector<std::vector<float>> inputs(n, std::vector<float>(elements));
  std::vector<double> exact(elements, 0.0);
  for (auto& in : inputs) {
    for (std::size_t i = 0; i < elements; ++i) {
      in[i] = static_cast<float>(rng.normal());
      exact[i] += in[i];
    }
  }
  ErrorTrial t;
  t.seed = seed;
  t.n = n;
  t.bits = spec.bits;
  t.block = spec.block_size;
  t.mse_inq = mean_squared_error(simulate_inq_path(inputs, spec).output, exact);
  t.mse_rq = mean_squared_error(simulate_rq_path(inputs, spec).output, exact);
  return t;
}

}  // namespace scinsim
