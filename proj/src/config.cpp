// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "scinsim/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>

namespace scinsim {

std::uint32_t element_size(ElementType t) {
  switch (t) {
    case ElementType::Fp16: return 2;
    case ElementType::Fp32: return 4;
    case ElementType::Int8: return 1;
  }
  return 1;
}

const char* to_string(ElementType t) {
  switch (t) {
    case ElementType::Fp16: return "fp16";
    case ElementType::Fp32: return "fp32";
    case ElementType::Int8: return "int8";
  }
  return "?";
}

ElementType element_type_from_string(const std::string& s) {
  if (s == "fp16") return ElementType::Fp16;
  if (s == "fp32") return ElementType::Fp32;
  if (s == "int8") return ElementType::Int8;
  throw ConfigError("dtype", 0, "unknown element type '" + s + "'");
}

std::uint32_t FlitRate::slots(Cycle c) const {
  using u128 = unsigned __int128;
  const u128 hi = (static_cast<u128>(c) + 1) * num / den;
  const u128 lo = static_cast<u128>(c) * num / den;
  return static_cast<std::uint32_t>(hi - lo);
}

SimConfig SimConfig::dgx(int accelerators) {
  SimConfig cfg;
  cfg.num_accelerators = accelerators;
  return cfg;
}

SimConfig SimConfig::prototype() {
  SimConfig cfg;
  cfg.num_accelerators = 4;
  cfg.num_switches = 1;
  cfg.link_latency = Picoseconds{360'000};
  cfg.link_bandwidth_per_direction = BytesPerSecond{8'000'000'000ULL};  // 128 Gbps bidirectional
  cfg.flit_size = 32;
  cfg.header_size = 32;
  cfg.max_payload = 4096;
  cfg.clock_frequency = 250'000'000ULL;
  cfg.accelerator_response_latency = Picoseconds{40'000};
  cfg.wave_size = 4096;
  cfg.waves_per_table = 8;
  cfg.table_capacity = 8 * 4096;
  cfg.reference_payload_bandwidth = BytesPerSecond{8'000'000'000ULL};
  return cfg;
}

void SimConfig::validate() const {
  auto fail = [](const char* field, const std::string& what) { throw ConfigError(field, 0, what); };
  if (num_accelerators < 1 || num_accelerators > 64) fail("num_accelerators", "must be in [1, 64]");
  if (num_switches < 1) fail("num_switches", "must be positive");
  if (link_latency.count() <= 0) fail("link_latency", "must be positive");
  if (link_bandwidth_per_direction.value == 0) fail("link_bandwidth_per_direction", "must be positive");
  if (accelerator_response_latency.count() <= 0) fail("accelerator_response_latency", "must be positive");
  if (flit_size == 0) fail("flit_size", "must be positive");
  if (max_payload == 0 || max_payload % flit_size != 0) fail("max_payload", "must be a positive multiple of flit_size");
  if (header_size != flit_size) fail("header_size", "header must occupy exactly one flit");
  if (isa_compute_latency_regular == 0) fail("isa_compute_latency_regular", "must be positive");
  if (isa_compute_latency_inq == 0) fail("isa_compute_latency_inq", "must be positive");
  if (wave_size == 0 || wave_size % max_payload != 0) fail("wave_size", "must be a positive multiple of max_payload");
  if (waves_per_table == 0) fail("waves_per_table", "must be positive");
  if (wave_size * waves_per_table > table_capacity) fail("table_capacity", "wave_size x waves_per_table exceeds table_capacity");
  if (quant_block == 0 || wave_size % quant_block != 0) fail("quant_block", "must divide wave_size");
  if (scale_bytes != 2 && scale_bytes != 4) fail("scale_bytes", "must be 2 or 4");
  if (dma_engines == 0) fail("dma_engines", "must be positive");
  if (reorder_window == 0) fail("reorder_window", "must be positive");
  if (poll_interval == 0) fail("poll_interval", "must be positive");
  if (dtype == ElementType::Int8) fail("dtype", "reduction dtype must be fp16 or fp32");
  if (max_payload % element_size(dtype) != 0) fail("max_payload", "must hold whole elements");
  (void)clock();  // period must be integral
  if (flit_rate().num == 0) fail("link_bandwidth_per_direction", "rounds to zero flits per cycle");
}

Picoseconds SimConfig::cycle_period() const { return clock().period(); }

Cycle SimConfig::link_latency_cycles() const { return clock().to_cycles_ceil(link_latency); }

Cycle SimConfig::response_latency_cycles() const {
  return clock().to_cycles_ceil(accelerator_response_latency);
}

FlitRate SimConfig::flit_rate() const {
  using u128 = unsigned __int128;
  u128 num = static_cast<u128>(link_bandwidth_per_direction.value) *
             static_cast<u128>(cycle_period().count());
  u128 den = static_cast<u128>(flit_size) * 1'000'000'000'000ULL;
  u128 a = num, b = den;
  while (b != 0) {
    const u128 t = a % b;
    a = b;
    b = t;
  }
  if (a != 0) {
    num /= a;
    den /= a;
  }
  return FlitRate{static_cast<std::uint64_t>(num), static_cast<std::uint64_t>(den)};
}

std::uint32_t SimConfig::resolved_vc_depth() const {
  if (vc_depth_flits > 0) return vc_depth_flits;
  const std::uint64_t bytes =
      min_buffer_capacity(link_bandwidth_per_direction, link_latency, Picoseconds{0}, flit_size);
  // A packet reserves credits for all its flits before its head leaves, so
  // on top of the round trip the queue holds two maximum-size packets, which
  // leaves room for single-flit responses sharing the class.
  const std::uint64_t rtt = ceil_div(bytes, flit_size) + 2 * ceil_div(flit_rate().num, flit_rate().den) + 2;
  return static_cast<std::uint32_t>(rtt + 2 * packet_flits(max_payload));
}

// ---------------------------------------------------------------------------
// Config file parsing

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Quantity {
  double value;
  std::string unit;
};

Quantity split_quantity(const std::string& field, int line, const std::string& text) {
  const char* begin = text.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin) throw ConfigError(field, line, "expected a number, got '" + text + "'");
  if (!std::isfinite(v)) throw ConfigError(field, line, "value is not finite");
  std::string unit = trim(std::string(end));
  return {v, unit};
}

double unit_scale(const std::string& field, int line, const std::string& unit,
                  const std::map<std::string, double>& table, const std::string& fallback) {
  const std::string u = unit.empty() ? fallback : unit;
  const auto it = table.find(u);
  if (it == table.end()) throw ConfigError(field, line, "unknown unit '" + unit + "'");
  return it->second;
}

std::uint64_t to_integral(const std::string& field, int line, double v) {
  if (v < 0) throw ConfigError(field, line, "must be non-negative");
  const double r = std::round(v);
  if (std::fabs(r - v) > 1e-6 * std::max(1.0, std::fabs(v))) {
    throw ConfigError(field, line, "must be a whole number in its base unit");
  }
  return static_cast<std::uint64_t>(r);
}

Picoseconds parse_time(const std::string& field, int line, const std::string& text) {
  static const std::map<std::string, double> units{
      {"ps", 1.0}, {"ns", 1e3}, {"us", 1e6}, {"ms", 1e9}, {"s", 1e12}};
  const auto q = split_quantity(field, line, text);
  return Picoseconds{static_cast<std::int64_t>(
      to_integral(field, line, q.value * unit_scale(field, line, q.unit, units, "ns")))};
}

BytesPerSecond parse_bandwidth(const std::string& field, int line, const std::string& text) {
  static const std::map<std::string, double> units{
      {"B/s", 1.0},  {"KB/s", 1e3},      {"MB/s", 1e6},      {"GB/s", 1e9},
      {"bps", 0.125}, {"Mbps", 1e6 / 8}, {"Gbps", 1e9 / 8}, {"Tbps", 1e12 / 8}};
  const auto q = split_quantity(field, line, text);
  return BytesPerSecond{to_integral(field, line, q.value * unit_scale(field, line, q.unit, units, "B/s"))};
}

std::uint64_t parse_bytes(const std::string& field, int line, const std::string& text) {
  static const std::map<std::string, double> units{
      {"B", 1.0},           {"KB", 1024.0},        {"KiB", 1024.0},
      {"MB", 1048576.0},    {"MiB", 1048576.0},    {"GB", 1073741824.0},
      {"GiB", 1073741824.0}};
  const auto q = split_quantity(field, line, text);
  return to_integral(field, line, q.value * unit_scale(field, line, q.unit, units, "B"));
}

std::uint64_t parse_frequency(const std::string& field, int line, const std::string& text) {
  static const std::map<std::string, double> units{
      {"Hz", 1.0}, {"kHz", 1e3}, {"MHz", 1e6}, {"GHz", 1e9}};
  const auto q = split_quantity(field, line, text);
  return to_integral(field, line, q.value * unit_scale(field, line, q.unit, units, "Hz"));
}

std::uint64_t parse_count(const std::string& field, int line, const std::string& text) {
  const auto q = split_quantity(field, line, text);
  if (!q.unit.empty()) throw ConfigError(field, line, "unexpected unit '" + q.unit + "'");
  return to_integral(field, line, q.value);
}

bool parse_bool(const std::string& field, int line, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(field, line, "expected true/false, got '" + text + "'");
}

using Setter = std::function<void(SimConfig&, const std::string&, int, const std::string&)>;

template <class T>
Setter count_field(T SimConfig::*member) {
  return [member](SimConfig& c, const std::string& f, int l, const std::string& v) {
    c.*member = static_cast<T>(parse_count(f, l, v));
  };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table{
      {"num_accelerators", count_field(&SimConfig::num_accelerators)},
      {"num_switches", count_field(&SimConfig::num_switches)},
      {"link_latency",
       [](SimConfig& c, const std::string& f, int l, const std::string& v) { c.link_latency = parse_time(f, l, v); }},
      {"link_bandwidth_per_direction",
       [](SimConfig& c, const std::string& f, int l, const std::string& v) {
         c.link_bandwidth_per_direction = parse_bandwidth(f, l, v);
       }},
      {"link_bandwidth_bidirectional",
       [](SimConfig& c, const std::string& f, int l, const std::string& v) {
         const auto bw = parse_bandwidth(f, l, v);
         if (bw.value % 2 != 0) throw ConfigError(f, l, "bidirectional bandwidth must split evenly");
         c.link_bandwidth_per_direction = BytesPerSecond{bw.value / 2};
       }},
      {"flit_size", [](SimConfig& c, const std::string& f, int l, const std::string& v) { c.flit_size = parse_bytes(f, l, v); }},
      {"max_payload", [](SimConfig& c, const std::string& f, int l, const std::string& v) { c.max_payload = parse_bytes(f, l, v); }},
      {"header_size", [](SimConfig& c, const std::string& f, int l, const std::string& v) { c.header_size = parse_bytes(f, l, v); }},
      {"clock_frequency",
       [](SimConfig& c, const std::string& f, int l, const std::string& v) { c.clock_frequency = parse_frequency(f, l, v); }},
      {"accelerator_response_latency",
       [](SimConfig& c, const std::string& f, int l, const std::string& v) {
         c.accelerator_response_latency = parse_time(f, l, v);
       }},
      {"isa_compute_latency_regular", count_field(&SimConfig::isa_compute_latency_regular)},
      {"isa_compute_latency_inq", count_field(&SimConfig::isa_compute_latency_inq)},
      {"wave_size", [](SimConfig& c, const std::string& f, int l, const std::string& v) { c.wave_size = parse_bytes(f, l, v); }},
      {"waves_per_table", count_field(&SimConfig::waves_per_table)},
      {"table_capacity",
       [](SimConfig& c, const std::string& f, int l, const std::string& v) { c.table_capacity = parse_bytes(f, l, v); }},
      {"rng_seed", count_field(&SimConfig::rng_seed)},
      {"dma_engines", count_field(&SimConfig::dma_engines)},
      {"reorder_window", count_field(&SimConfig::reorder_window)},
      {"poll_interval", count_field(&SimConfig::poll_interval)},
      {"vc_depth_flits", count_field(&SimConfig::vc_depth_flits)},
      {"quant_block", count_field(&SimConfig::quant_block)},
      {"scale_bytes", count_field(&SimConfig::scale_bytes)},
      {"deadlock_timeout_cycles", count_field(&SimConfig::deadlock_timeout_cycles)},
      {"dtype",
       [](SimConfig& c, const std::string& f, int l, const std::string& v) {
         try {
           c.dtype = element_type_from_string(v);
         } catch (const ConfigError&) {
           throw ConfigError(f, l, "unknown element type '" + v + "'");
         }
       }},
      {"reference_payload_bandwidth",
       [](SimConfig& c, const std::string& f, int l, const std::string& v) {
         c.reference_payload_bandwidth = parse_bandwidth(f, l, v);
       }},
      {"enable_isa",
       [](SimConfig& c, const std::string& f, int l, const std::string& v) { c.enable_isa = parse_bool(f, l, v); }},
  };
  return table;
}

}  // namespace

SimConfig parse_config(const std::string& text, SimConfig base) {
  SimConfig cfg = base;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  bool seen_field = false;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line;
    bool quoted = false;
    for (char ch : raw) {
      if (ch == '"') quoted = !quoted;
      if (ch == '#' && !quoted) break;
      line += ch;
    }
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;  // tolerate TOML section headers
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("", line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (key == "preset") {
      if (seen_field) throw ConfigError(key, line_no, "preset must precede all other fields");
      if (value == "dgx8") cfg = SimConfig::dgx(8);
      else if (value == "dgx16") cfg = SimConfig::dgx(16);
      else if (value == "prototype") cfg = SimConfig::prototype();
      else throw ConfigError(key, line_no, "unknown preset '" + value + "'");
      continue;
    }
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(key, line_no, "unknown field");
    it->second(cfg, key, line_no, value);
    seen_field = true;
  }
  cfg.validate();
  return cfg;
}

std::uint64_t parse_byte_quantity(const std::string& text, const std::string& field, int line) {
  return parse_bytes(field, line, trim(text));
}

Picoseconds parse_time_quantity(const std::string& text, const std::string& field, int line) {
  return parse_time(field, line, trim(text));
}

SimConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", 0, "cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const SimConfig& c) {
  std::ostringstream o;
  o << "num_accelerators = " << c.num_accelerators << "\n"
    << "num_switches = " << c.num_switches << "\n"
    << "link_latency = \"" << c.link_latency.count() << " ps\"\n"
    << "link_bandwidth_per_direction = \"" << c.link_bandwidth_per_direction.value << " B/s\"\n"
    << "flit_size = " << c.flit_size << "\n"
    << "max_payload = " << c.max_payload << "\n"
    << "header_size = " << c.header_size << "\n"
    << "clock_frequency = " << c.clock_frequency << "\n"
    << "accelerator_response_latency = \"" << c.accelerator_response_latency.count() << " ps\"\n"
    << "isa_compute_latency_regular = " << c.isa_compute_latency_regular << "\n"
    << "isa_compute_latency_inq = " << c.isa_compute_latency_inq << "\n"
    << "wave_size = " << c.wave_size << "\n"
    << "waves_per_table = " << c.waves_per_table << "\n"
    << "table_capacity = " << c.table_capacity << "\n"
    << "rng_seed = " << c.rng_seed << "\n"
    << "dma_engines = " << c.dma_engines << "\n"
    << "reorder_window = " << c.reorder_window << "\n"
    << "poll_interval = " << c.poll_interval << "\n"
    << "vc_depth_flits = " << c.vc_depth_flits << "\n"
    << "dtype = \"" << to_string(c.dtype) << "\"\n"
    << "quant_block = " << c.quant_block << "\n"
    << "scale_bytes = " << c.scale_bytes << "\n"
    << "reference_payload_bandwidth = \"" << c.reference_payload_bandwidth.value << " B/s\"\n"
    << "enable_isa = " << (c.enable_isa ? "true" : "false") << "\n"
    << "deadlock_timeout_cycles = " << c.deadlock_timeout_cycles << "\n";
  return o.str();
}

}  // namespace scinsim
