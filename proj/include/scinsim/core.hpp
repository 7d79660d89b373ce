// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace scinsim {

/// Simulation time is integer picoseconds everywhere.
using Picoseconds = std::chrono::duration<std::int64_t, std::pico>;
using Cycle = std::uint64_t;

/// Bandwidth in bytes per second. Kept integral so buffer sizing stays exact.
struct BytesPerSecond {
  std::uint64_t value = 0;
  friend bool operator==(BytesPerSecond, BytesPerSecond) = default;
};

constexpr BytesPerSecond operator""_GBps(long double gb) {
  return BytesPerSecond{static_cast<std::uint64_t>(gb * 1e9L)};
}
constexpr BytesPerSecond operator""_GBps(unsigned long long gb) {
  return BytesPerSecond{gb * 1'000'000'000ULL};
}

/// Raised on malformed user input (config, programs, tensors).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, int line, const std::string& what)
      : std::runtime_error(format(field, line, what)), field_(std::move(field)), line_(line) {}

  const std::string& field() const { return field_; }
  int line() const { return line_; }

 private:
  static std::string format(const std::string& field, int line, const std::string& what);
  std::string field_;
  int line_;
};

/// A simulated protocol rule was broken. Indicates a model bug or a
/// malformed scenario; never recovered from inside a run.
class ProtocolViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Runtime failure of a simulation (bad address, deadlock, ...).
class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Converts between cycles and picoseconds for a fixed clock. The clock
/// period must be a whole number of picoseconds.
class SimClock {
 public:
  explicit SimClock(std::uint64_t frequency_hz);

  Picoseconds period() const { return period_; }
  std::uint64_t frequency() const { return frequency_; }

  Cycle cycle() const { return cycle_; }
  void tick() { ++cycle_; }
  void advance_to(Cycle c);

  Picoseconds to_time(Cycle c) const { return period_ * static_cast<std::int64_t>(c); }
  /// Smallest cycle count covering `t`.
  Cycle to_cycles_ceil(Picoseconds t) const;
  /// Exact conversion; throws if `t` is not a whole number of cycles.
  Cycle to_cycles_exact(Picoseconds t) const;

 private:
  std::uint64_t frequency_;
  Picoseconds period_;
  Cycle cycle_ = 0;
};

/// Bytes needed to cover `bandwidth * (2 * link_latency + response_latency)`,
/// rounded up to a whole byte.
std::uint64_t min_buffer_bytes(BytesPerSecond bandwidth, Picoseconds link_latency,
                               Picoseconds response_latency);

/// Minimum reduction-buffer capacity for full link bandwidth, rounded up to
/// a multiple of `flit_size`.
std::uint64_t min_buffer_capacity(BytesPerSecond bandwidth, Picoseconds link_latency,
                                  Picoseconds response_latency, std::uint64_t flit_size);

inline double to_ns(Picoseconds t) { return static_cast<double>(t.count()) / 1000.0; }

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b);

/// FNV-1a over a byte range, chained through `h`.
std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n,
                    std::uint64_t h = 0xcbf29ce484222325ULL);

/// Per-experiment results.
struct RunReport {
  std::string algorithm;
  std::uint64_t message_size = 0;
  int num_participants = 0;
  std::uint64_t seed = 0;

  Cycle total_cycles = 0;
  Picoseconds total_time{0};
  std::uint64_t payload_bytes_moved = 0;
  double achieved_bandwidth = 0.0;  // bytes/s
  Picoseconds sync_overhead{0};
  std::vector<std::pair<std::string, Picoseconds>> per_phase_breakdown;
  std::uint64_t correctness_digest = 0;

  // Supplementary counters.
  Picoseconds data_time{0};
  std::uint64_t padding_bytes = 0;
  int max_sync_hops = 0;
  int max_data_hops = 0;
  bool correct = true;
  double max_abs_error = 0.0;
  std::string failure;

  Picoseconds phase_sum() const;
};

}  // namespace scinsim
