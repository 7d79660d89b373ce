// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "scinsim/collectives.hpp"
#include "scinsim/config.hpp"
#include "scinsim/llm_perf.hpp"

namespace scinsim {

/// Runs every spec on its own Machine, spread over `workers` threads.
/// Reports come back in spec order regardless of scheduling.
std::vector<RunReport> run_specs(const SimConfig& cfg, const std::vector<CollectiveSpec>& specs, unsigned workers,
                                 const std::vector<Inputs>* inputs = nullptr);

// ---------------------------------------------------------------------------
// Wave regulation sweep

struct WavePoint {
  std::uint32_t waves = 0;
  std::uint64_t wave_size = 0;
  double bandwidth = 0;        // bytes/s, data phase only
  double fraction_of_best = 0;
  bool saturated = false;      // within 5% of the best point
  bool correct = true;
};

/// Wave size for `waves` waves sharing a `buffer`-byte table, rounded down
/// to whole payloads.
std::uint64_t wave_size_for(std::uint64_t buffer, std::uint32_t waves, std::uint64_t max_payload);

/// SCIN All-Reduce bandwidth (no synchronization) with a fixed table of
/// `buffer` bytes split into each wave count.
std::vector<WavePoint> sweep_waves(const SimConfig& cfg, std::uint64_t buffer, const std::vector<std::uint32_t>& waves,
                                   std::uint64_t message_size, unsigned workers = 1);

// ---------------------------------------------------------------------------
// Calibration against the hardware prototype

struct CalibrationPoint {
  std::string name;
  std::string unit;
  double reference = 0;
  double simulated = 0;
  double relative_error = 0;  // |sim - ref| / ref
  double tolerance = 0;       // relative, or an absolute floor for utilization
  bool pass = false;
};

/// Reference values measured on the four-FPGA prototype.
struct CalibrationReference {
  double latency_4k_ns = 2620.0;
  double latency_16m_ns = 2.27e6;
  double utilization_16m = 0.924;
  double latency_tolerance = 0.15;
  double min_utilization = 0.90;
};

std::vector<CalibrationPoint> calibrate(const SimConfig& cfg, const CalibrationReference& ref = {},
                                        unsigned workers = 1);
std::string calibration_to_csv(const std::vector<CalibrationPoint>& points);

// ---------------------------------------------------------------------------
// Latency tables for the inference model

/// Simulated All-Reduce latency (with synchronization) for every algorithm
/// and size.
std::map<std::string, LatencyTable> simulate_latency_table(const SimConfig& cfg,
                                                           const std::vector<Algorithm>& algorithms,
                                                           const std::vector<std::uint64_t>& sizes,
                                                           std::uint64_t seed, unsigned workers = 1);

/// Ring baseline, SCIN, and SCIN with INQ in prefill only.
struct CommModels {
  CommModel ring;
  CommModel scin;
  CommModel scin_inq;
};

/// Throws ConfigError if a required algorithm is missing from `tables`.
CommModels comm_models_from_tables(const std::map<std::string, LatencyTable>& tables);

}  // namespace scinsim
