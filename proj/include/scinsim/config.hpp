// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "scinsim/core.hpp"

namespace scinsim {

enum class ElementType : std::uint8_t { Fp16, Fp32, Int8 };

std::uint32_t element_size(ElementType t);
const char* to_string(ElementType t);
ElementType element_type_from_string(const std::string& s);

/// Exact flits-per-cycle rate of one link direction, num/den.
struct FlitRate {
  std::uint64_t num = 1;
  std::uint64_t den = 1;

  /// Flit slots available in cycle `c` (the schedule is exact over time).
  std::uint32_t slots(Cycle c) const;
  double per_cycle() const { return static_cast<double>(num) / static_cast<double>(den); }
};

/// Machine and experiment parameters. Defaults describe the 8-accelerator,
/// 4-switch DGX-like system: 900 GB/s aggregate bidirectional per
/// accelerator (112.5 GB/s per direction on each of 4 switch links),
/// 250 ns links, 128 B payload, 16 B header flit.
struct SimConfig {
  int num_accelerators = 8;
  int num_switches = 4;

  Picoseconds link_latency = Picoseconds{250'000};
  BytesPerSecond link_bandwidth_per_direction{112'500'000'000ULL};
  std::uint64_t flit_size = 16;
  std::uint64_t max_payload = 128;
  std::uint64_t header_size = 16;
  std::uint64_t clock_frequency = 1'000'000'000ULL;

  Picoseconds accelerator_response_latency = Picoseconds{100'000};  // L_acc
  std::uint32_t isa_compute_latency_regular = 20;                   // cycles
  std::uint32_t isa_compute_latency_inq = 100;                      // cycles

  std::uint64_t wave_size = 4096;
  std::uint32_t waves_per_table = 16;
  std::uint64_t table_capacity = 65536;  // data bytes, scale storage excluded

  std::uint64_t rng_seed = 1;

  // Endpoint model.
  std::uint32_t dma_engines = 4;
  std::uint32_t reorder_window = 4;
  std::uint32_t poll_interval = 1;  // cycles

  /// Queue depth per class in flits; 0 derives it from the credit
  /// round trip (buffer sizing with zero response latency).
  std::uint32_t vc_depth_flits = 0;

  ElementType dtype = ElementType::Fp16;
  std::uint32_t quant_block = 64;
  std::uint32_t scale_bytes = 2;

  /// Reference unidirectional payload bandwidth of one accelerator, used
  /// to express utilization. Pinned, not derived.
  BytesPerSecond reference_payload_bandwidth{360'000'000'000ULL};

  bool enable_isa = true;
  std::uint64_t deadlock_timeout_cycles = 2'000'000;

  static SimConfig dgx(int accelerators = 8);
  /// Four endpoint FPGAs on one switch FPGA: 128 Gbps bidirectional links,
  /// 360 ns endpoint-switch latency, 32 B flits at 250 MHz, 4 KB packets.
  static SimConfig prototype();

  /// Throws ConfigError naming the offending field.
  void validate() const;

  SimClock clock() const { return SimClock(clock_frequency); }
  Picoseconds cycle_period() const;
  Cycle link_latency_cycles() const;
  Cycle response_latency_cycles() const;
  FlitRate flit_rate() const;
  std::uint32_t resolved_vc_depth() const;

  std::uint64_t packet_flits(std::uint64_t payload_bytes) const {
    return 1 + ceil_div(payload_bytes, flit_size);
  }
  /// Scale bytes accompanying `code_bytes` int8 codes.
  std::uint64_t scale_bytes_for(std::uint64_t code_bytes) const {
    return ceil_div(code_bytes, quant_block) * scale_bytes;
  }
};

/// Parses "key = value" lines ('#' comments, optional quotes, optional unit
/// suffixes such as ns, us, GB/s, Gbps, KiB, MHz). Unknown keys and bad
/// values raise ConfigError with the field name and line number.
SimConfig parse_config(const std::string& text, SimConfig base = SimConfig{});
SimConfig load_config(const std::filesystem::path& path);
std::string dump_config(const SimConfig& cfg);

/// Single quantities in config syntax: "16MB" / "4 KiB" / "128" (bytes,
/// binary multiples) and "250ns" / "1.5 us" (bare numbers are ns).
std::uint64_t parse_byte_quantity(const std::string& text, const std::string& field, int line = 0);
Picoseconds parse_time_quantity(const std::string& text, const std::string& field, int line = 0);

}  // namespace scinsim
