// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "scinsim/llm_perf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "scinsim/core.hpp"

namespace scinsim {

const char* to_string(Stage s) { return s == Stage::Prefill ? "prefill" : "decode"; }

Stage stage_from_string(const std::string& s) {
  if (s == "prefill") return Stage::Prefill;
  if (s == "decode") return Stage::Decode;
  throw ConfigError("stage", 0, "expected 'prefill' or 'decode', got '" + s + "'");
}

void ModelShape::validate() const {
  if (num_layers == 0) throw ConfigError("num_layers", 0, "must be positive");
  if (hidden_size == 0) throw ConfigError("hidden_size", 0, "must be positive");
  if (comm_precision_bytes == 0) throw ConfigError("comm_precision_bytes", 0, "must be positive");
}

void InferenceWorkload::validate() const {
  if (batch == 0) throw ConfigError("batch", 0, "must be at least 1");
  if (prefill_length == 0) throw ConfigError("seq_len", 0, "must be at least 1");
  if (output_tokens == 0) throw ConfigError("output_tokens", 0, "must be at least 1");
}

std::string InferenceWorkload::label() const {
  return "(" + std::to_string(batch) + "," + std::to_string(prefill_length) + ")";
}

std::uint64_t allreduce_message_size(Stage stage, std::uint64_t b, std::uint64_t s, std::uint64_t h,
                                     std::uint32_t bytes_per_elem) {
  return stage == Stage::Prefill ? bytes_per_elem * b * s * h : bytes_per_elem * b * h;
}

std::uint64_t allreduce_count(Stage stage, std::uint64_t num_layers, std::uint64_t output_tokens) {
  return stage == Stage::Prefill ? 2 * num_layers : 2 * num_layers * output_tokens;
}

std::string ProfileKey::str() const {
  std::ostringstream o;
  o << to_string(stage) << ",b=" << batch << ",s=" << seq_len << ",tp=" << tp << "," << precision;
  return o.str();
}

void ComputeProfile::set(const ProfileKey& key, double compute_ns) {
  if (!(compute_ns >= 0) || !std::isfinite(compute_ns)) {
    throw ConfigError("compute_ns", 0, "compute time for " + key.str() + " must be finite and non-negative");
  }
  entries_[key] = compute_ns;
}

double ComputeProfile::at(const ProfileKey& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("profile", 0, "missing entry " + key.str());
  return it->second;
}

void ComputeProfile::require(const InferenceWorkload& w, std::uint32_t tp, const std::string& precision) const {
  std::vector<std::string> missing;
  for (Stage st : {Stage::Prefill, Stage::Decode}) {
    const ProfileKey k{st, w.batch, w.prefill_length, tp, precision};
    if (!contains(k)) missing.push_back(k.str());
  }
  if (missing.empty()) return;
  std::string msg = "profile lacks required keys:";
  for (const auto& m : missing) msg += " [" + m + "]";
  throw ConfigError("profile", 0, msg);
}

LatencyTable::LatencyTable(std::vector<std::pair<std::uint64_t, double>> points) {
  for (const auto& [b, ns] : points) add(b, ns);
}

void LatencyTable::add(std::uint64_t bytes, double ns) {
  if (!(ns >= 0) || !std::isfinite(ns)) throw ConfigError("latency", 0, "latency must be finite and non-negative");
  auto it = std::lower_bound(points_.begin(), points_.end(), bytes,
                             [](const auto& p, std::uint64_t b) { return p.first < b; });
  if (it != points_.end() && it->first == bytes) {
    it->second = ns;
  } else {
    points_.insert(it, {bytes, ns});
  }
}

double LatencyTable::at(std::uint64_t bytes) const {
  if (points_.empty()) throw ConfigError("latency", 0, "latency table is empty");
  if (bytes <= points_.front().first || points_.size() == 1) return points_.front().second;
  auto hi = std::lower_bound(points_.begin(), points_.end(), bytes,
                             [](const auto& p, std::uint64_t b) { return p.first < b; });
  if (hi == points_.end()) hi = points_.end() - 1;
  const auto lo = hi - 1;
  const double x0 = static_cast<double>(lo->first), x1 = static_cast<double>(hi->first);
  const double t = (static_cast<double>(bytes) - x0) / (x1 - x0);
  return lo->second + t * (hi->second - lo->second);
}

StageTimes estimate_stage_times(const ComputeProfile& profile, const ModelShape& shape, const InferenceWorkload& w,
                                std::uint32_t tp, const std::string& precision, const CommModel& comm) {
  shape.validate();
  w.validate();
  profile.require(w, tp, precision);
  StageTimes t;
  t.prefill_compute_ns = profile.at({Stage::Prefill, w.batch, w.prefill_length, tp, precision});
  t.decode_compute_ns = profile.at({Stage::Decode, w.batch, w.prefill_length, tp, precision});
  const std::uint64_t pre_bytes =
      allreduce_message_size(Stage::Prefill, w.batch, w.prefill_length, shape.hidden_size, shape.comm_precision_bytes);
  const std::uint64_t dec_bytes =
      allreduce_message_size(Stage::Decode, w.batch, w.prefill_length, shape.hidden_size, shape.comm_precision_bytes);
  t.prefill_comm_ns =
      static_cast<double>(allreduce_count(Stage::Prefill, shape.num_layers, w.output_tokens)) * comm.prefill.at(pre_bytes);
  const double decode_total =
      static_cast<double>(allreduce_count(Stage::Decode, shape.num_layers, w.output_tokens)) * comm.decode.at(dec_bytes);
  t.decode_comm_ns = decode_total / w.output_tokens;
  t.ttft_ns = t.prefill_compute_ns + t.prefill_comm_ns;
  t.tpot_ns = t.decode_compute_ns + t.decode_comm_ns;
  return t;
}

SpeedupEstimate estimate_ttft_tpot(const ComputeProfile& profile, const ModelShape& shape, const InferenceWorkload& w,
                                   std::uint32_t tp, const std::string& precision, const CommModel& baseline,
                                   const CommModel& candidate) {
  SpeedupEstimate e;
  e.workload = w;
  e.baseline = estimate_stage_times(profile, shape, w, tp, precision, baseline);
  e.candidate = estimate_stage_times(profile, shape, w, tp, precision, candidate);
  e.ttft_speedup = e.candidate.ttft_ns > 0 ? e.baseline.ttft_ns / e.candidate.ttft_ns : 1.0;
  e.tpot_speedup = e.candidate.tpot_ns > 0 ? e.baseline.tpot_ns / e.candidate.tpot_ns : 1.0;
  return e;
}

double stage_speedup(double comm_fraction, double comm_speedup) {
  return 1.0 / ((1.0 - comm_fraction) + comm_fraction / comm_speedup);
}

double comm_fraction(const StageTimes& t, Stage stage) {
  if (stage == Stage::Prefill) return t.ttft_ns > 0 ? t.prefill_comm_ns / t.ttft_ns : 0.0;
  return t.tpot_ns > 0 ? t.decode_comm_ns / t.tpot_ns : 0.0;
}

void SyntheticProfileParams::validate() const {
  shape.validate();
  auto frac = [](double f, const char* name) {
    if (!(f > 0.0 && f < 1.0)) throw ConfigError(name, 0, "must lie strictly between 0 and 1");
  };
  frac(prefill_comm_fraction, "prefill_comm_fraction");
  frac(decode_comm_fraction, "decode_comm_fraction");
  if (!(decode_attention_share >= 0.0 && decode_attention_share < 1.0)) {
    throw ConfigError("decode_attention_share", 0, "must lie in [0, 1)");
  }
  if (tp == 0) throw ConfigError("tp", 0, "must be positive");
  if (grid.empty()) throw ConfigError("grid", 0, "needs at least one (b, s) workload");
  for (const auto& [b, s] : grid) {
    if (b == 0 || s == 0) throw ConfigError("grid", 0, "batch and seq_len must be positive");
  }
}

ComputeProfile generate_synthetic_profile(const SyntheticProfileParams& p, const CommModel& baseline) {
  p.validate();
  const ModelShape& sh = p.shape;
  auto prefill_comm = [&](std::uint64_t b, std::uint64_t s) {
    return static_cast<double>(allreduce_count(Stage::Prefill, sh.num_layers, 1)) *
           baseline.prefill.at(allreduce_message_size(Stage::Prefill, b, s, sh.hidden_size, sh.comm_precision_bytes));
  };
  auto decode_comm = [&](std::uint64_t b) {
    return static_cast<double>(allreduce_count(Stage::Decode, sh.num_layers, 1)) *
           baseline.decode.at(allreduce_message_size(Stage::Decode, b, 1, sh.hidden_size, sh.comm_precision_bytes));
  };

  double min_tokens = std::numeric_limits<double>::infinity();
  for (const auto& [b, s] : p.grid) min_tokens = std::min(min_tokens, static_cast<double>(b) * s);

  // Unit-scale compute shapes; the share comm/(comm + k*shape) peaks where
  // comm/shape does.
  auto prefill_shape = [&](double tokens) { return tokens / min_tokens; };
  auto decode_shape = [&](double tokens) {
    return (1 - p.decode_attention_share) + p.decode_attention_share * tokens / min_tokens;
  };
  double pre_ratio = 0, dec_ratio = 0;
  for (const auto& [b, s] : p.grid) {
    const double tokens = static_cast<double>(b) * s;
    pre_ratio = std::max(pre_ratio, prefill_comm(b, s) / prefill_shape(tokens));
    dec_ratio = std::max(dec_ratio, decode_comm(b) / decode_shape(tokens));
  }
  const double k_pre = pre_ratio * (1 - p.prefill_comm_fraction) / p.prefill_comm_fraction;
  const double k_dec = dec_ratio * (1 - p.decode_comm_fraction) / p.decode_comm_fraction;

  ComputeProfile out;
  for (const auto& [b, s] : p.grid) {
    const double tokens = static_cast<double>(b) * s;
    out.set({Stage::Prefill, b, s, p.tp, p.precision}, k_pre * prefill_shape(tokens));
    out.set({Stage::Decode, b, s, p.tp, p.precision}, k_dec * decode_shape(tokens));
  }
  return out;
}

}  // namespace scinsim
