// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "scinsim/config.hpp"
#include "scinsim/core.hpp"
#include "scinsim/fabric.hpp"
#include "scinsim/isa.hpp"
#include "scinsim/quant.hpp"

namespace scinsim {

enum class Algorithm : std::uint8_t { Scin, ScinInq, Ring, NvlsLike };

const char* to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

enum class InputPattern : std::uint8_t { Gaussian, Ones, Zeros, Integers };

struct CollectiveSpec {
  Algorithm algorithm = Algorithm::Scin;
  std::uint64_t message_size = 0;  // bytes of full-precision data per accelerator
  std::uint64_t participants = 0;  // bitmask, 0 selects every accelerator
  bool include_sync = true;
  std::uint64_t chunking = 0;      // ring slice bytes, 0 sends each chunk as one slice
  std::uint64_t seed = 1;
  InputPattern pattern = InputPattern::Gaussian;
  /// Per-accelerator arrival offsets; missing entries arrive at time 0.
  std::vector<Picoseconds> arrivals;
};

/// Per-accelerator input values, already rounded to the storage type.
using Inputs = std::vector<std::vector<float>>;

Inputs make_inputs(std::uint64_t seed, int n, std::size_t elements, ElementType dtype, InputPattern pattern);

struct RunDetails {
  std::vector<int> members;
  Inputs inputs;                              // by member rank
  std::vector<std::vector<float>> outputs;    // final values, by member rank
  std::vector<std::array<std::uint64_t, 7>> originated;  // packets by kind, by member rank
  std::vector<IsaStats> isa_stats;
  std::uint64_t peak_rx_flits = 0;
  std::uint32_t queue_depth = 0;
  std::uint64_t flits_injected = 0;
  std::uint64_t flits_delivered = 0;
  std::vector<std::optional<Cycle>> resume;  // SCIN: resume cycle by member rank
  std::size_t chunk_elements = 0;            // ring chunk size
};

struct RunOptions {
  std::ostream* trace = nullptr;
  const Inputs* inputs = nullptr;  // overrides generated inputs (by member rank)
  RunDetails* details = nullptr;
  bool verify = true;
};

RunReport run_collective(const SimConfig& cfg, const CollectiveSpec& spec, const RunOptions& opts = {});
RunReport run_ring_allreduce(const SimConfig& cfg, const CollectiveSpec& spec, const RunOptions& opts = {});
RunReport run_scin_allreduce(const SimConfig& cfg, const CollectiveSpec& spec, const RunOptions& opts = {});
RunReport run_nvls_like_allreduce(const SimConfig& cfg, const CollectiveSpec& spec, const RunOptions& opts = {});

/// Builds the instruction program of a SCIN All-Reduce (plus its scale
/// instruction when quantized).
std::vector<IsaInstruction> scin_program(const SimConfig& cfg, std::uint32_t id, std::uint64_t length,
                                         std::uint64_t participants, bool quantized);

// Reference results.

/// Element-wise fixed-tree sum in participant order, rounded to `dtype`.
std::vector<float> tree_oracle(const Inputs& inputs, ElementType dtype);
/// Ring order: chunk c starts at rank c and accumulates ranks c+1, c+2, ...
/// with one rounding per hop.
std::vector<float> ring_oracle(const Inputs& inputs, std::size_t chunk_elements, ElementType dtype);
/// Quantized in-network path (source quantization included).
std::vector<float> inq_oracle(const Inputs& inputs, const SimConfig& cfg);
QuantBlockSpec inq_spec(const SimConfig& cfg);

struct VerifyResult {
  bool ok = true;
  std::size_t first_mismatch = 0;
  int rank = -1;
  double max_abs_error = 0.0;
  std::string message;
};

/// Compares every output bit-exactly against `golden`; reports the first
/// difference. `exact` (optional) gives the unrounded sum for error stats.
VerifyResult verify_result(const std::vector<std::vector<float>>& outputs, const std::vector<float>& golden,
                           const std::vector<double>* exact = nullptr);

std::vector<double> exact_sum(const Inputs& inputs);

}  // namespace scinsim
