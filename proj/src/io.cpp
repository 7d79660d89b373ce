// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "scinsim/io.hpp"

#include <bit>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "scinsim/endpoint.hpp"
#include "scinsim/half.hpp"

namespace scinsim {

static_assert(std::endian::native == std::endian::little, "raw tensor files assume a little-endian host");

using nlohmann::json;

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(key, 0, std::string("bad value: ") + e.what());
  }
}

std::uint64_t json_size(const json& v, const char* field) {
  if (v.is_number_unsigned() || v.is_number_integer()) {
    const auto n = v.get<std::int64_t>();
    if (n < 0) throw ConfigError(field, 0, "must be non-negative");
    return static_cast<std::uint64_t>(n);
  }
  if (v.is_string()) return parse_byte_quantity(v.get<std::string>(), field);
  throw ConfigError(field, 0, "expected a byte count or a string such as \"16MB\"");
}

std::uint64_t json_mask(const json& v, const char* field) {
  if (v.is_number_integer()) return v.get<std::uint64_t>();
  if (v.is_array()) {
    std::uint64_t m = 0;
    for (const auto& e : v) {
      const int a = e.get<int>();
      if (a < 0 || a >= 64) throw ConfigError(field, 0, "accelerator index out of range");
      m |= std::uint64_t{1} << a;
    }
    return m;
  }
  if (v.is_string()) return std::stoull(v.get<std::string>(), nullptr, 0);
  throw ConfigError(field, 0, "expected a bitmask or a list of accelerator indices");
}

InputPattern pattern_from_string(const std::string& s) {
  if (s == "gaussian") return InputPattern::Gaussian;
  if (s == "ones") return InputPattern::Ones;
  if (s == "zeros") return InputPattern::Zeros;
  if (s == "integers") return InputPattern::Integers;
  throw ConfigError("pattern", 0, "unknown input pattern '" + s + "'");
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? "" : f.substr(b, e - b + 1);
  }
  return out;
}

/// Reads a CSV with a header row; returns rows as column-name maps.
std::vector<std::map<std::string, std::string>> read_csv(const std::string& text,
                                                         const std::vector<std::string>& required) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> header;
  std::vector<std::map<std::string, std::string>> rows;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_csv_line(line);
    if (header.empty()) {
      header = fields;
      for (const auto& r : required) {
        if (std::find(header.begin(), header.end(), r) == header.end()) {
          throw ConfigError(r, line_no, "missing CSV column");
        }
      }
      continue;
    }
    if (fields.size() != header.size()) throw ConfigError("", line_no, "wrong number of CSV fields");
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size(); ++i) row[header[i]] = fields[i];
    row["#line"] = std::to_string(line_no);
    rows.push_back(std::move(row));
  }
  return rows;
}

double to_double(const std::map<std::string, std::string>& row, const std::string& key) {
  const int line = std::stoi(row.at("#line"));
  const std::string& v = row.at(key);
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0') throw ConfigError(key, line, "expected a number, got '" + v + "'");
  return d;
}

std::uint32_t to_u32(const std::map<std::string, std::string>& row, const std::string& key) {
  const double d = to_double(row, key);
  if (d < 0 || d != static_cast<double>(static_cast<std::uint32_t>(d))) {
    throw ConfigError(key, std::stoi(row.at("#line")), "expected a non-negative integer");
  }
  return static_cast<std::uint32_t>(d);
}

}  // namespace

// ---------------------------------------------------------------------------
// Files

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("", 0, "cannot write " + path.string());
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", 0, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Tensors

std::size_t TensorFile::elements() const { return bytes.size() / element_size(dtype); }

std::vector<float> TensorFile::to_floats() const {
  std::vector<float> out(elements());
  for (std::size_t i = 0; i < out.size(); ++i) {
    switch (dtype) {
      case ElementType::Fp16: {
        std::uint16_t h;
        std::memcpy(&h, bytes.data() + 2 * i, 2);
        out[i] = half_to_float(h);
        break;
      }
      case ElementType::Fp32:
        std::memcpy(&out[i], bytes.data() + 4 * i, 4);
        break;
      case ElementType::Int8:
        out[i] = static_cast<float>(static_cast<std::int8_t>(bytes[i]));
        break;
    }
  }
  return out;
}

TensorFile TensorFile::from_floats(const std::vector<float>& values, ElementType dtype, std::uint64_t base_address,
                                   std::vector<std::size_t> shape) {
  TensorFile t;
  t.dtype = dtype;
  t.base_address = base_address;
  t.shape = shape.empty() ? std::vector<std::size_t>{values.size()} : std::move(shape);
  const std::uint32_t es = element_size(dtype);
  t.bytes.resize(values.size() * es);
  for (std::size_t i = 0; i < values.size(); ++i) {
    switch (dtype) {
      case ElementType::Fp16: {
        const std::uint16_t h = float_to_half(values[i]);
        std::memcpy(t.bytes.data() + 2 * i, &h, 2);
        break;
      }
      case ElementType::Fp32:
        std::memcpy(t.bytes.data() + 4 * i, &values[i], 4);
        break;
      case ElementType::Int8: {
        const float r = std::max(-128.0f, std::min(127.0f, values[i]));
        t.bytes[i] = static_cast<std::uint8_t>(static_cast<std::int8_t>(r));
        break;
      }
    }
  }
  return t;
}

void write_tensor(const std::filesystem::path& sidecar, const TensorFile& t) {
  std::filesystem::path raw = sidecar;
  raw.replace_extension(".bin");
  json j;
  j["dtype"] = to_string(t.dtype);
  j["shape"] = t.shape;
  j["base_address"] = t.base_address;
  j["data"] = raw.filename().string();
  write_text(sidecar, j.dump(2) + "\n");
  write_text(raw, std::string(t.bytes.begin(), t.bytes.end()));
}

TensorFile read_tensor(const std::filesystem::path& sidecar) {
  json j;
  try {
    j = json::parse(read_text(sidecar));
  } catch (const json::parse_error& e) {
    throw ConfigError(sidecar.string(), 0, std::string("malformed tensor sidecar: ") + e.what());
  }
  TensorFile t;
  t.dtype = element_type_from_string(get_or<std::string>(j, "dtype", "fp16"));
  t.shape = get_or<std::vector<std::size_t>>(j, "shape", {});
  t.base_address = get_or<std::uint64_t>(j, "base_address", kDataBase);
  std::filesystem::path raw = get_or<std::string>(j, "data", "");
  if (raw.empty()) {
    raw = sidecar;
    raw.replace_extension(".bin");
  } else if (raw.is_relative()) {
    raw = sidecar.parent_path() / raw;
  }
  const std::string data = read_text(raw);
  t.bytes.assign(data.begin(), data.end());
  std::size_t expect = 1;
  for (std::size_t d : t.shape) expect *= d;
  if (!t.shape.empty() && expect * element_size(t.dtype) != t.bytes.size()) {
    throw ConfigError(sidecar.string(), 0,
                      "raw file holds " + std::to_string(t.bytes.size()) + " bytes, shape needs " +
                          std::to_string(expect * element_size(t.dtype)));
  }
  if (t.bytes.size() % element_size(t.dtype) != 0) {
    throw ConfigError(sidecar.string(), 0, "raw file is not a whole number of elements");
  }
  return t;
}

// ---------------------------------------------------------------------------
// Programs

std::vector<IsaInstruction> parse_program(const std::string& json_text, const SimConfig& cfg) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("program", 0, std::string("malformed JSON: ") + e.what());
  }
  if (j.is_object() && j.contains("instructions")) j = j["instructions"];
  if (!j.is_array()) throw ConfigError("program", 0, "expected a list of instructions");
  std::vector<IsaInstruction> prog;
  for (const auto& e : j) {
    const int line = static_cast<int>(prog.size()) + 1;
    if (!e.is_object()) throw ConfigError("program", line, "each instruction must be a JSON object");
    IsaInstruction ins;
    ins.id = get_or<std::uint32_t>(e, "id", 0);
    if (!e.contains("length")) throw ConfigError("length", line, "missing");
    ins.length = json_size(e["length"], "length");
    const json& addr = e.contains("addresses") ? e["addresses"] : e.value("address", json(kDataBase));
    try {
      if (addr.is_array()) {
        for (const auto& a : addr) ins.addresses.push_back(a.get<std::uint64_t>());
      } else {
        ins.addresses.assign(cfg.num_accelerators, addr.get<std::uint64_t>());
      }
    } catch (const json::exception&) {
      throw ConfigError("addresses", line, "addresses must be unsigned integers");
    }
    if (e.contains("source_mask")) ins.source_mask = json_mask(e["source_mask"], "source_mask");
    if (e.contains("destination_mask")) ins.destination_mask = json_mask(e["destination_mask"], "destination_mask");
    ins.quant_enable = get_or<bool>(e, "quant_enable", false);
    ins.is_scale_load = get_or<bool>(e, "is_scale_load", false);
    ins.dtype = element_type_from_string(get_or<std::string>(e, "dtype", to_string(cfg.dtype)));
    prog.push_back(std::move(ins));
  }
  validate_program(prog, cfg);
  return prog;
}

std::vector<IsaInstruction> load_program(const std::filesystem::path& path, const SimConfig& cfg) {
  return parse_program(read_text(path), cfg);
}

std::string program_to_json(const std::vector<IsaInstruction>& program) {
  json arr = json::array();
  for (const auto& ins : program) {
    json e;
    e["id"] = ins.id;
    e["length"] = ins.length;
    e["addresses"] = ins.addresses;
    e["source_mask"] = ins.source_mask;
    e["destination_mask"] = ins.destination_mask;
    e["quant_enable"] = ins.quant_enable;
    e["is_scale_load"] = ins.is_scale_load;
    e["dtype"] = to_string(ins.dtype);
    arr.push_back(std::move(e));
  }
  return arr.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Spec files

namespace {

SpecEntry spec_from_json(const json& e, const json& defaults, const std::filesystem::path& base_dir) {
  if (!e.is_object()) throw ConfigError("spec", 0, "each spec must be a JSON object");
  json m = defaults;
  for (auto it = e.begin(); it != e.end(); ++it) m[it.key()] = it.value();
  static const std::vector<std::string> known{"algorithm", "message_size", "participants", "include_sync",
                                              "chunking",  "seed",         "pattern",      "arrivals_ns",
                                              "inputs"};
  for (auto it = m.begin(); it != m.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw ConfigError(it.key(), 0, "unknown spec field");
    }
  }
  SpecEntry out;
  CollectiveSpec& s = out.spec;
  s.algorithm = algorithm_from_string(get_or<std::string>(m, "algorithm", "scin"));
  if (!m.contains("message_size")) throw ConfigError("message_size", 0, "missing");
  s.message_size = json_size(m["message_size"], "message_size");
  if (m.contains("participants")) s.participants = json_mask(m["participants"], "participants");
  s.include_sync = get_or<bool>(m, "include_sync", true);
  if (m.contains("chunking")) s.chunking = json_size(m["chunking"], "chunking");
  s.seed = get_or<std::uint64_t>(m, "seed", 1);
  s.pattern = pattern_from_string(get_or<std::string>(m, "pattern", "gaussian"));
  for (double ns : get_or<std::vector<double>>(m, "arrivals_ns", {})) {
    if (!(ns >= 0)) throw ConfigError("arrivals_ns", 0, "arrival offsets must be non-negative");
    s.arrivals.push_back(Picoseconds{static_cast<std::int64_t>(std::llround(ns * 1000.0))});
  }
  for (const auto& p : get_or<std::vector<std::string>>(m, "inputs", {})) {
    std::filesystem::path f(p);
    out.input_files.push_back(f.is_relative() ? base_dir / f : f);
  }
  return out;
}

}  // namespace

std::vector<SpecEntry> parse_specs(const std::string& json_text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("spec", 0, std::string("malformed JSON: ") + e.what());
  }
  std::vector<SpecEntry> out;
  const json none = json::object();
  if (j.is_array()) {
    for (const auto& e : j) out.push_back(spec_from_json(e, none, base_dir));
  } else if (j.is_object() && j.contains("specs")) {
    for (const auto& e : j["specs"]) out.push_back(spec_from_json(e, none, base_dir));
  } else if (j.is_object() && j.contains("sweep")) {
    json sw = j["sweep"];
    const auto algs = get_or<std::vector<std::string>>(sw, "algorithms", {"scin"});
    if (!sw.contains("sizes") || !sw["sizes"].is_array()) throw ConfigError("sizes", 0, "sweep needs a list of sizes");
    const json sizes = sw["sizes"];
    sw.erase("algorithms");
    sw.erase("sizes");
    for (const auto& size : sizes) {
      for (const auto& a : algs) {
        json e = json::object();
        e["algorithm"] = a;
        e["message_size"] = size;
        out.push_back(spec_from_json(e, sw, base_dir));
      }
    }
  } else if (j.is_object()) {
    out.push_back(spec_from_json(j, none, base_dir));
  } else {
    throw ConfigError("spec", 0, "expected a spec object, a list of specs, or a sweep");
  }
  return out;
}

std::vector<SpecEntry> load_specs(const std::filesystem::path& path) {
  return parse_specs(read_text(path), path.parent_path());
}

// ---------------------------------------------------------------------------
// Reports

std::string report_csv_header() {
  return "algorithm,message_size,num_participants,seed,total_cycles,total_time_ns,payload_bytes_moved,"
         "achieved_bandwidth_gbps,sync_overhead_ns,data_time_ns,padding_bytes,max_sync_hops,max_data_hops,"
         "correct,max_abs_error,correctness_digest,phases\n";
}

std::string report_csv_row(const RunReport& r) {
  std::ostringstream o;
  char digest[32];
  std::snprintf(digest, sizeof digest, "%016" PRIx64, r.correctness_digest);
  o << r.algorithm << ',' << r.message_size << ',' << r.num_participants << ',' << r.seed << ',' << r.total_cycles
    << ',' << fmt("%.3f", to_ns(r.total_time)) << ',' << r.payload_bytes_moved << ','
    << fmt("%.6f", r.achieved_bandwidth / 1e9) << ',' << fmt("%.3f", to_ns(r.sync_overhead)) << ','
    << fmt("%.3f", to_ns(r.data_time)) << ',' << r.padding_bytes << ',' << r.max_sync_hops << ','
    << r.max_data_hops << ',' << (r.correct ? 1 : 0) << ',' << fmt("%.9g", r.max_abs_error) << ',' << digest
    << ',';
  for (std::size_t i = 0; i < r.per_phase_breakdown.size(); ++i) {
    if (i) o << ';';
    o << r.per_phase_breakdown[i].first << '=' << fmt("%.3f", to_ns(r.per_phase_breakdown[i].second));
  }
  o << '\n';
  return o.str();
}

std::string reports_to_csv(const std::vector<RunReport>& reports) {
  std::string s = report_csv_header();
  for (const auto& r : reports) s += report_csv_row(r);
  return s;
}

std::string reports_to_json(const std::vector<RunReport>& reports) {
  json arr = json::array();
  for (const auto& r : reports) {
    json e;
    e["algorithm"] = r.algorithm;
    e["message_size"] = r.message_size;
    e["num_participants"] = r.num_participants;
    e["seed"] = r.seed;
    e["total_cycles"] = r.total_cycles;
    e["total_time_ps"] = r.total_time.count();
    e["payload_bytes_moved"] = r.payload_bytes_moved;
    e["achieved_bandwidth"] = r.achieved_bandwidth;
    e["sync_overhead_ps"] = r.sync_overhead.count();
    json phases = json::array();
    for (const auto& [name, t] : r.per_phase_breakdown) phases.push_back({{"phase", name}, {"time_ps", t.count()}});
    e["per_phase_breakdown"] = phases;
    char digest[32];
    std::snprintf(digest, sizeof digest, "%016" PRIx64, r.correctness_digest);
    e["correctness_digest"] = digest;
    e["data_time_ps"] = r.data_time.count();
    e["padding_bytes"] = r.padding_bytes;
    e["max_sync_hops"] = r.max_sync_hops;
    e["max_data_hops"] = r.max_data_hops;
    e["correct"] = r.correct;
    e["max_abs_error"] = r.max_abs_error;
    if (!r.failure.empty()) e["failure"] = r.failure;
    arr.push_back(std::move(e));
  }
  return arr.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// LLM model files

ComputeProfile parse_profile_csv(const std::string& text) {
  ComputeProfile p;
  for (const auto& row : read_csv(text, {"stage", "batch", "seq_len", "tp", "precision", "compute_ns"})) {
    ProfileKey k;
    k.stage = stage_from_string(row.at("stage"));
    k.batch = to_u32(row, "batch");
    k.seq_len = to_u32(row, "seq_len");
    k.tp = to_u32(row, "tp");
    k.precision = row.at("precision");
    p.set(k, to_double(row, "compute_ns"));
  }
  return p;
}

ComputeProfile load_profile_csv(const std::filesystem::path& path) { return parse_profile_csv(read_text(path)); }

std::string profile_to_csv(const ComputeProfile& p) {
  std::string s = "stage,batch,seq_len,tp,precision,compute_ns\n";
  for (const auto& [k, ns] : p.entries()) {
    s += std::string(to_string(k.stage)) + ',' + std::to_string(k.batch) + ',' + std::to_string(k.seq_len) + ',' +
         std::to_string(k.tp) + ',' + k.precision + ',' + fmt("%.3f", ns) + '\n';
  }
  return s;
}

std::map<std::string, LatencyTable> parse_latency_csv(const std::string& text) {
  std::map<std::string, LatencyTable> out;
  for (const auto& row : read_csv(text, {"algorithm", "message_size", "latency_ns"})) {
    const double size = to_double(row, "message_size");
    if (size <= 0) throw ConfigError("message_size", std::stoi(row.at("#line")), "must be positive");
    out[row.at("algorithm")].add(static_cast<std::uint64_t>(size), to_double(row, "latency_ns"));
  }
  return out;
}

std::string latency_to_csv(const std::map<std::string, LatencyTable>& tables) {
  std::string s = "algorithm,message_size,latency_ns\n";
  for (const auto& [name, t] : tables) {
    for (const auto& [bytes, ns] : t.points()) s += name + ',' + std::to_string(bytes) + ',' + fmt("%.3f", ns) + '\n';
  }
  return s;
}

std::string llm_rows_to_csv(const std::vector<LlmRow>& rows) {
  std::string s = "workload,algorithm,ttft_ns,tpot_ns,ttft_speedup,tpot_speedup\n";
  for (const auto& r : rows) {
    s += '"' + r.workload + "\"," + r.algorithm + ',' + fmt("%.3f", r.ttft_ns) + ',' + fmt("%.3f", r.tpot_ns) + ',' +
         fmt("%.6f", r.ttft_speedup) + ',' + fmt("%.6f", r.tpot_speedup) + '\n';
  }
  return s;
}

std::string error_trials_to_csv(const std::vector<ErrorTrial>& trials) {
  std::string s = "seed,N,bits,block,mse_inq,mse_rq\n";
  for (const auto& t : trials) {
    s += std::to_string(t.seed) + ',' + std::to_string(t.n) + ',' + std::to_string(t.bits) + ',' +
         std::to_string(t.block) + ',' + fmt("%.9e", t.mse_inq) + ',' + fmt("%.9e", t.mse_rq) + '\n';
  }
  return s;
}

}  // namespace scinsim
