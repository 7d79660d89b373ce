// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace scinsim {

enum class Stage : std::uint8_t { Prefill, Decode };

const char* to_string(Stage s);
Stage stage_from_string(const std::string& s);

struct ModelShape {
  std::string name = "llama2-7b";
  std::uint32_t num_layers = 32;
  std::uint64_t hidden_size = 4096;
  std::uint32_t comm_precision_bytes = 2;

  void validate() const;
};

struct InferenceWorkload {
  std::uint32_t batch = 1;
  std::uint32_t prefill_length = 1;
  std::uint32_t output_tokens = 64;

  void validate() const;
  std::string label() const;  // "(b,s)"
};

/// Bytes reduced by one All-Reduce: b*s*h elements in prefill, b*h in decode.
std::uint64_t allreduce_message_size(Stage stage, std::uint64_t b, std::uint64_t s, std::uint64_t h,
                                     std::uint32_t bytes_per_elem);
/// Two All-Reduces per layer, per decoded token in the decode stage.
std::uint64_t allreduce_count(Stage stage, std::uint64_t num_layers, std::uint64_t output_tokens);

struct ProfileKey {
  Stage stage = Stage::Prefill;
  std::uint32_t batch = 1;
  std::uint32_t seq_len = 1;
  std::uint32_t tp = 8;
  std::string precision = "fp16";

  auto operator<=>(const ProfileKey&) const = default;
  std::string str() const;
};

/// Per-accelerator compute time. Prefill entries hold the whole prefill
/// pass; decode entries hold one decode step (one output token).
class ComputeProfile {
 public:
  void set(const ProfileKey& key, double compute_ns);
  /// Throws ConfigError naming the missing key.
  double at(const ProfileKey& key) const;
  bool contains(const ProfileKey& key) const { return entries_.count(key) != 0; }
  /// Throws ConfigError listing every missing key if either stage of
  /// `w` is absent.
  void require(const InferenceWorkload& w, std::uint32_t tp, const std::string& precision) const;
  const std::map<ProfileKey, double>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

 private:
  std::map<ProfileKey, double> entries_;
};

/// Simulated All-Reduce latency by message size, linearly interpolated
/// between points. Below the smallest point (or with a single point) that
/// point's latency is used; above the largest the last slope is extended.
class LatencyTable {
 public:
  LatencyTable() = default;
  explicit LatencyTable(std::vector<std::pair<std::uint64_t, double>> points);
  void add(std::uint64_t bytes, double ns);
  double at(std::uint64_t bytes) const;
  bool empty() const { return points_.empty(); }
  const std::vector<std::pair<std::uint64_t, double>>& points() const { return points_; }

 private:
  std::vector<std::pair<std::uint64_t, double>> points_;  // sorted by size
};

/// Communication cost per stage for one algorithm choice.
struct CommModel {
  std::string name;
  LatencyTable prefill;
  LatencyTable decode;
};

struct StageTimes {
  double prefill_compute_ns = 0;
  double prefill_comm_ns = 0;
  double decode_compute_ns = 0;  // per token
  double decode_comm_ns = 0;     // per token
  double ttft_ns = 0;
  double tpot_ns = 0;
};

StageTimes estimate_stage_times(const ComputeProfile& profile, const ModelShape& shape, const InferenceWorkload& w,
                                std::uint32_t tp, const std::string& precision, const CommModel& comm);

struct SpeedupEstimate {
  InferenceWorkload workload;
  StageTimes baseline;
  StageTimes candidate;
  double ttft_speedup = 1.0;
  double tpot_speedup = 1.0;
};

SpeedupEstimate estimate_ttft_tpot(const ComputeProfile& profile, const ModelShape& shape, const InferenceWorkload& w,
                                   std::uint32_t tp, const std::string& precision, const CommModel& baseline,
                                   const CommModel& candidate);

/// Amdahl form: a stage whose communication share is `comm_fraction`
/// under the baseline, with communication sped up by `comm_speedup`.
double stage_speedup(double comm_fraction, double comm_speedup);

/// Synthetic compute profile over a grid of (b, s) workloads. Prefill
/// compute scales with b*s; decode compute is a fixed weight-streaming part
/// plus an attention part that scales with b*s (`decode_attention_share`
/// of decode compute at the smallest grid workload). The overall scale of
/// each stage is set so that the largest baseline communication share
/// over the grid equals `prefill_comm_fraction` / `decode_comm_fraction`.
struct SyntheticProfileParams {
  ModelShape shape;
  std::uint32_t tp = 8;
  std::string precision = "fp16";
  double prefill_comm_fraction = 0.47;
  double decode_comm_fraction = 0.25;
  double decode_attention_share = 0.2;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> grid;  // (b, s) points to emit

  void validate() const;
};

ComputeProfile generate_synthetic_profile(const SyntheticProfileParams& p, const CommModel& baseline);

/// Baseline communication share of one stage for `w`.
double comm_fraction(const StageTimes& t, Stage stage);

}  // namespace scinsim
