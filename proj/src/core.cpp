// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "scinsim/core.hpp"

#include <cmath>

#include "scinsim/rng.hpp"

namespace scinsim {

namespace {
constexpr std::int64_t kPicosPerSecond = 1'000'000'000'000LL;
}

std::string ConfigError::format(const std::string& field, int line, const std::string& what) {
  std::string out = "config error";
  if (!field.empty()) out += " in field '" + field + "'";
  if (line > 0) out += " at line " + std::to_string(line);
  return out + ": " + what;
}

SimClock::SimClock(std::uint64_t frequency_hz) : frequency_(frequency_hz) {
  if (frequency_hz == 0) throw ConfigError("clock_frequency", 0, "must be positive");
  if (static_cast<std::uint64_t>(kPicosPerSecond) % frequency_hz != 0) {
    throw ConfigError("clock_frequency", 0,
                      "period of " + std::to_string(frequency_hz) +
                          " Hz is not a whole number of picoseconds");
  }
  period_ = Picoseconds{kPicosPerSecond / static_cast<std::int64_t>(frequency_hz)};
}

void SimClock::advance_to(Cycle c) {
  if (c < cycle_) throw ProtocolViolation("clock moved backwards");
  cycle_ = c;
}

Cycle SimClock::to_cycles_ceil(Picoseconds t) const {
  if (t.count() <= 0) return 0;
  return ceil_div(static_cast<std::uint64_t>(t.count()), static_cast<std::uint64_t>(period_.count()));
}

Cycle SimClock::to_cycles_exact(Picoseconds t) const {
  if (t.count() < 0 || t.count() % period_.count() != 0) {
    throw ConfigError("", 0, std::to_string(t.count()) + " ps is not a whole number of cycles");
  }
  return static_cast<Cycle>(t.count() / period_.count());
}

std::uint64_t min_buffer_bytes(BytesPerSecond bandwidth, Picoseconds link_latency,
                               Picoseconds response_latency) {
  const auto window = static_cast<unsigned __int128>(2 * link_latency.count() + response_latency.count());
  const unsigned __int128 product = static_cast<unsigned __int128>(bandwidth.value) * window;
  const auto pps = static_cast<unsigned __int128>(kPicosPerSecond);
  return static_cast<std::uint64_t>((product + pps - 1) / pps);
}

std::uint64_t min_buffer_capacity(BytesPerSecond bandwidth, Picoseconds link_latency,
                                  Picoseconds response_latency, std::uint64_t flit_size) {
  const std::uint64_t bytes = min_buffer_bytes(bandwidth, link_latency, response_latency);
  if (flit_size == 0) return bytes;
  return ceil_div(bytes, flit_size) * flit_size;
}

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n, std::uint64_t h) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

Picoseconds RunReport::phase_sum() const {
  Picoseconds sum{0};
  for (const auto& [name, t] : per_phase_breakdown) sum += t;
  return sum;
}

// ---------------------------------------------------------------------------
// SplitMix64

std::uint64_t SplitMix64::mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t SplitMix64::next() {
  state_ += 0x9e3779b97f4a7c15ULL;
  return mix(state_);
}

double SplitMix64::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::uint64_t SplitMix64::below(std::uint64_t n) {
  // Reject the top partial bucket so every residue is equally likely.
  const std::uint64_t limit = max() - max() % n;
  std::uint64_t x = next();
  while (x >= limit) x = next();
  return x % n;
}

double SplitMix64::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u = 0.0, v = 0.0, s = 0.0;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * m;
  has_spare_ = true;
  return u * m;
}

SplitMix64 SplitMix64::fork(std::uint64_t stream) const {
  return SplitMix64(mix(state_ ^ mix(stream + 0x632be59bd9b4e019ULL)));
}

}  // namespace scinsim
