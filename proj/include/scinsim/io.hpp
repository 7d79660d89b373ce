// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "scinsim/collectives.hpp"
#include "scinsim/config.hpp"
#include "scinsim/core.hpp"
#include "scinsim/isa.hpp"
#include "scinsim/llm_perf.hpp"
#include "scinsim/quant.hpp"

namespace scinsim {

// ---------------------------------------------------------------------------
// Tensors: raw little-endian array plus a JSON sidecar
// {"dtype": "fp16", "shape": [..], "base_address": .., "data": "x.bin"}.

struct TensorFile {
  ElementType dtype = ElementType::Fp16;
  std::vector<std::size_t> shape;
  std::uint64_t base_address = 0;
  std::vector<std::uint8_t> bytes;

  std::size_t elements() const;
  std::vector<float> to_floats() const;
  static TensorFile from_floats(const std::vector<float>& values, ElementType dtype, std::uint64_t base_address,
                                std::vector<std::size_t> shape = {});
};

/// Writes `sidecar` and the raw array next to it (same stem, ".bin").
void write_tensor(const std::filesystem::path& sidecar, const TensorFile& t);
TensorFile read_tensor(const std::filesystem::path& sidecar);

// ---------------------------------------------------------------------------
// Instruction programs: a JSON list of instruction objects.

std::vector<IsaInstruction> parse_program(const std::string& json_text, const SimConfig& cfg);
std::vector<IsaInstruction> load_program(const std::filesystem::path& path, const SimConfig& cfg);
std::string program_to_json(const std::vector<IsaInstruction>& program);

// ---------------------------------------------------------------------------
// Collective spec files.

struct SpecEntry {
  CollectiveSpec spec;
  std::vector<std::filesystem::path> input_files;  // tensor sidecars, one per participant
};

/// Accepts a single spec object, a list of them, {"specs": [...]}, or a
/// sweep {"sweep": {"algorithms": [...], "sizes": [...], ...defaults}}.
std::vector<SpecEntry> parse_specs(const std::string& json_text,
                                   const std::filesystem::path& base_dir = std::filesystem::path{});
std::vector<SpecEntry> load_specs(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Reports.

std::string report_csv_header();
std::string report_csv_row(const RunReport& r);
std::string reports_to_csv(const std::vector<RunReport>& reports);
std::string reports_to_json(const std::vector<RunReport>& reports);

// ---------------------------------------------------------------------------
// LLM model inputs and outputs.

/// Columns: stage, batch, seq_len, tp, precision, compute_ns.
ComputeProfile parse_profile_csv(const std::string& text);
ComputeProfile load_profile_csv(const std::filesystem::path& path);
std::string profile_to_csv(const ComputeProfile& p);

/// Columns: algorithm, message_size, latency_ns.
std::map<std::string, LatencyTable> parse_latency_csv(const std::string& text);
std::string latency_to_csv(const std::map<std::string, LatencyTable>& tables);

struct LlmRow {
  std::string workload;
  std::string algorithm;
  double ttft_ns = 0;
  double tpot_ns = 0;
  double ttft_speedup = 1;
  double tpot_speedup = 1;
};
std::string llm_rows_to_csv(const std::vector<LlmRow>& rows);

/// Columns: seed, N, bits, block, mse_inq, mse_rq.
std::string error_trials_to_csv(const std::vector<ErrorTrial>& trials);

/// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace scinsim
