// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "scinsim/collectives.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

#include "scinsim/half.hpp"
#include "scinsim/machine.hpp"
#include "scinsim/reduction.hpp"
#include "scinsim/rng.hpp"

namespace scinsim {

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Scin: return "scin";
    case Algorithm::ScinInq: return "scin-inq";
    case Algorithm::Ring: return "ring";
    case Algorithm::NvlsLike: return "nvls-like";
  }
  return "?";
}

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "scin") return Algorithm::Scin;
  if (s == "scin-inq" || s == "scin_inq" || s == "inq") return Algorithm::ScinInq;
  if (s == "ring") return Algorithm::Ring;
  if (s == "nvls-like" || s == "nvls_like" || s == "nvls") return Algorithm::NvlsLike;
  throw ConfigError("algorithm", 0, "unknown algorithm '" + s + "'");
}

namespace {

float round_to(float v, ElementType t) { return t == ElementType::Fp16 ? round_to_half(v) : v; }

void store(std::uint8_t* dst, float v, ElementType t) {
  if (t == ElementType::Fp16) {
    const std::uint16_t h = float_to_half(v);
    std::memcpy(dst, &h, 2);
  } else {
    std::memcpy(dst, &v, 4);
  }
}

float load(const std::uint8_t* src, ElementType t) {
  if (t == ElementType::Fp16) {
    std::uint16_t h;
    std::memcpy(&h, src, 2);
    return half_to_float(h);
  }
  float v;
  std::memcpy(&v, src, 4);
  return v;
}

std::vector<int> members_of(const SimConfig& cfg, std::uint64_t mask) {
  const int n = cfg.num_accelerators;
  const std::uint64_t all = n >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1;
  if (mask == 0) mask = all;
  if ((mask & ~all) != 0) throw ConfigError("participants", 0, "mask selects a nonexistent accelerator");
  std::vector<int> out;
  for (int a = 0; a < n; ++a) {
    if (mask >> a & 1) out.push_back(a);
  }
  return out;
}

std::uint64_t mask_of(const std::vector<int>& members) {
  std::uint64_t m = 0;
  for (int a : members) m |= std::uint64_t{1} << a;
  return m;
}

/// State shared by every algorithm's run.
struct Setup {
  std::vector<int> members;
  std::vector<int> rank;  // accelerator -> member rank, -1 if absent
  std::size_t elements = 0;
  ElementType dtype = ElementType::Fp16;
  Inputs inputs;
  std::vector<Cycle> arrival;  // by member rank
  Cycle t0 = 0;                // last arrival
};

Setup prepare(const SimConfig& cfg, const CollectiveSpec& spec, const RunOptions& opts, std::uint32_t esize,
              ElementType dtype) {
  if (spec.message_size == 0) throw ConfigError("message_size", 0, "must be positive");
  if (spec.message_size % esize != 0) {
    throw ConfigError("message_size", 0, "not a whole number of " + std::to_string(esize) + "-byte elements");
  }
  Setup s;
  s.members = members_of(cfg, spec.participants);
  s.rank.assign(cfg.num_accelerators, -1);
  for (std::size_t r = 0; r < s.members.size(); ++r) s.rank[s.members[r]] = static_cast<int>(r);
  s.elements = spec.message_size / esize;
  s.dtype = dtype;
  const int n = static_cast<int>(s.members.size());
  if (opts.inputs) {
    if (opts.inputs->size() != s.members.size()) throw ConfigError("inputs", 0, "need one input per participant");
    for (const auto& v : *opts.inputs) {
      if (v.size() != s.elements) throw ConfigError("inputs", 0, "input length does not match the message size");
    }
    s.inputs = *opts.inputs;
    for (auto& v : s.inputs) {
      for (auto& x : v) x = round_to(x, dtype);
    }
  } else {
    s.inputs = make_inputs(spec.seed, n, s.elements, dtype, spec.pattern);
  }
  const SimClock clock = cfg.clock();
  for (std::size_t r = 0; r < s.members.size(); ++r) {
    const std::size_t a = static_cast<std::size_t>(s.members[r]);
    const Picoseconds t = a < spec.arrivals.size() ? spec.arrivals[a] : Picoseconds{0};
    if (t < Picoseconds{0}) throw ConfigError("arrivals", 0, "arrival offsets must be non-negative");
    s.arrival.push_back(clock.to_cycles_ceil(t));
    s.t0 = std::max(s.t0, s.arrival.back());
  }
  return s;
}

std::uint64_t digest_of(const Machine& m, const std::vector<int>& members) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int a : members) h = m.endpoint(a).memory().digest(h);
  return h;
}

void finish_report(RunReport& rep, const SimConfig& cfg, const CollectiveSpec& spec, const Machine& m,
                   const Setup& s, Cycle total_cycles) {
  rep.message_size = spec.message_size;
  rep.num_participants = static_cast<int>(s.members.size());
  rep.seed = spec.seed;
  rep.total_cycles = total_cycles;
  rep.total_time = cfg.cycle_period() * static_cast<std::int64_t>(total_cycles);
  std::uint64_t bytes = 0;
  for (int a : s.members) bytes += m.endpoint(a).originated_payload_bytes();
  rep.payload_bytes_moved = bytes / s.members.size();
  const double secs = static_cast<double>(rep.total_time.count()) * 1e-12;
  rep.achieved_bandwidth = secs > 0 ? static_cast<double>(spec.message_size) / secs : 0.0;
  rep.correctness_digest = digest_of(m, s.members);
}

void fill_details(RunDetails* d, const Machine& m, const Setup& s, std::vector<std::vector<float>> outputs) {
  if (!d) return;
  d->members = s.members;
  d->inputs = s.inputs;
  d->outputs = std::move(outputs);
  d->originated.clear();
  for (int a : s.members) d->originated.push_back(m.endpoint(a).originated());
  d->isa_stats.clear();
  for (int sw = 0; sw < m.config().num_switches; ++sw) d->isa_stats.push_back(m.isa(sw).stats());
  const FabricStats& fs = m.fabric().stats();
  d->flits_injected = fs.flits_injected;
  d->flits_delivered = fs.flits_delivered;
  d->peak_rx_flits = m.fabric().peak_rx_occupancy();
  d->queue_depth = m.fabric().queue_depth();
}

std::vector<float> read_values(Machine& m, int acc, std::uint64_t base, std::size_t n, ElementType t) {
  std::vector<float> out(n);
  const std::uint32_t es = element_size(t);
  const std::uint8_t* p = m.endpoint(acc).memory().at(base, n * es);
  for (std::size_t i = 0; i < n; ++i) out[i] = load(p + i * es, t);
  return out;
}

void write_values(Machine& m, int acc, std::uint64_t base, const std::vector<float>& v, ElementType t) {
  const std::uint32_t es = element_size(t);
  std::uint8_t* p = m.endpoint(acc).memory().at(base, v.size() * es);
  for (std::size_t i = 0; i < v.size(); ++i) store(p + i * es, v[i], t);
}

void apply_verification(RunReport& rep, const VerifyResult& v) {
  rep.correct = v.ok;
  rep.max_abs_error = v.max_abs_error;
  if (!v.ok) rep.failure = v.message;
}

void max_into(int& dst, int v) { dst = std::max(dst, v); }

// ---------------------------------------------------------------------------
// SCIN: accelerators only arrive and poll; the switches do the rest.

class ScinDriver : public Driver, public EndpointListener {
 public:
  ScinDriver(Machine& m, const Setup& s, std::uint32_t id, std::vector<int> switches)
      : m_(m), s_(s), id_(id), switches_(std::move(switches)), arrived_(s.members.size(), false),
        resumed_(s.members.size()) {
    for (int a : s.members) m.endpoint(a).set_listener(this);
  }

  void tick(Cycle c) override {
    for (std::size_t r = 0; r < s_.members.size(); ++r) {
      if (arrived_[r] || s_.arrival[r] > c) continue;
      arrived_[r] = true;
      m_.endpoint(s_.members[r]).arrive(id_, switches_, c);
    }
  }
  bool finished() const override {
    return std::all_of(resumed_.begin(), resumed_.end(), [](const auto& v) { return v.has_value(); });
  }
  Cycle next_wake(Cycle now) const override {
    Cycle next = kNever;
    for (std::size_t r = 0; r < s_.members.size(); ++r) {
      if (!arrived_[r]) next = std::min(next, std::max(now, s_.arrival[r]));
    }
    return next;
  }
  std::string describe() const override {
    std::ostringstream o;
    o << "scin driver: collective " << id_ << ", resumed";
    for (std::size_t r = 0; r < resumed_.size(); ++r) o << ' ' << (resumed_[r] ? "y" : "n");
    o << '\n';
    return o.str();
  }

  void on_packet(Endpoint&, int, const Packet& p, Cycle) override {
    if (p.h.kind == PacketKind::FlagWrite) max_into(sync_hops_, p.path_hops);
    if (p.h.kind == PacketKind::WriteReq || p.h.kind == PacketKind::ScaleData) max_into(data_hops_, p.path_hops);
  }
  void on_resume(Endpoint& ep, std::uint32_t id, Cycle c) override {
    if (id != id_) return;
    resumed_[s_.rank[ep.index()]] = c;
  }

  const std::vector<std::optional<Cycle>>& resumed() const { return resumed_; }
  int sync_hops() const { return sync_hops_; }
  int data_hops() const { return data_hops_; }

 private:
  Machine& m_;
  const Setup& s_;
  std::uint32_t id_;
  std::vector<int> switches_;
  std::vector<bool> arrived_;
  std::vector<std::optional<Cycle>> resumed_;
  int sync_hops_ = 0;
  int data_hops_ = 0;
};

// ---------------------------------------------------------------------------
// Ring: reduce-scatter into staging slots, then all-gather in place. Every
// step is data, fence (all write responses in), flag to the next node.

class RingDriver : public Driver, public EndpointListener {
 public:
  RingDriver(Machine& m, const Setup& s, std::size_t chunk_elements, std::uint64_t slice_bytes)
      : m_(m), s_(s), n_(static_cast<int>(s.members.size())) {
    const SimConfig& cfg = m.config();
    esize_ = element_size(s.dtype);
    chunk_bytes_ = chunk_elements * esize_;
    slice_bytes_ = std::min<std::uint64_t>(slice_bytes == 0 ? chunk_bytes_ : slice_bytes, chunk_bytes_);
    slices_ = ceil_div(chunk_bytes_, slice_bytes_);
    rounds_ = 2 * static_cast<std::uint64_t>(n_ - 1);
    items_ = rounds_ * slices_;
    backlog_limit_ = 4 * cfg.packet_flits(cfg.max_payload);
    nodes_.resize(n_);
    for (auto& nd : nodes_) {
      nd.acks.assign(items_, 0);
      nd.sent.assign(items_, false);
      nd.flag_in.assign(items_, false);
    }
    for (int a : s.members) m.endpoint(a).set_listener(this);
  }

  void tick(Cycle c) override {
    for (int i = 0; i < n_; ++i) pump(i, c);
  }
  bool finished() const override {
    return std::all_of(nodes_.begin(), nodes_.end(),
                       [&](const Node& nd) { return nd.flags_in == items_ && nd.flags_out == items_; });
  }
  Cycle next_wake(Cycle now) const override {
    Cycle next = kNever;
    for (int i = 0; i < n_; ++i) {
      const Node& nd = nodes_[i];
      if (nd.item >= items_) continue;
      if (!ready(i, nd.item, now)) {
        if (nd.item / slices_ == 0) next = std::min(next, std::max(now, s_.arrival[i]));
        continue;
      }
      // Blocked on transmit backlog: the fabric wakes us when it drains.
      next = std::min(next, now);
    }
    return next;
  }
  std::string describe() const override {
    std::ostringstream o;
    for (int i = 0; i < n_; ++i) {
      const Node& nd = nodes_[i];
      o << "ring node " << i << ": next item " << nd.item << '/' << items_ << ", flags in " << nd.flags_in
        << ", flags out " << nd.flags_out << '\n';
    }
    return o.str();
  }

  void on_packet(Endpoint& ep, int, const Packet& p, Cycle c) override {
    const int i = s_.rank[ep.index()];
    Node& nd = nodes_[i];
    switch (p.h.kind) {
      case PacketKind::WriteResp: {
        const std::uint64_t item = p.h.tag;
        if (item >= items_ || nd.acks[item] == 0) throw ProtocolViolation("ring: unexpected write response");
        if (--nd.acks[item] == 0 && nd.sent[item]) send_flag(i, item);
        break;
      }
      case PacketKind::WriteReq:
        max_into(data_hops_, p.path_hops);
        break;
      case PacketKind::FlagWrite: {
        max_into(sync_hops_, p.path_hops);
        const std::uint64_t item = p.h.tag;
        if (item >= items_ || nd.flag_in[item]) throw ProtocolViolation("ring: duplicate or unknown flag");
        nd.flag_in[item] = true;
        ++nd.flags_in;
        nd.last_flag = c;
        const std::uint64_t r = item / slices_;
        if (r < static_cast<std::uint64_t>(n_ - 1)) {
          accumulate(i, r, item % slices_);
          if (++nd.rs_flags == static_cast<std::uint64_t>(n_ - 1) * slices_) nd.rs_done = c;
        }
        break;
      }
      default:
        break;
    }
  }

  Cycle end() const {
    Cycle e = 0;
    for (const auto& nd : nodes_) e = std::max(e, nd.last_flag);
    return e;
  }
  Cycle reduce_scatter_end() const {
    Cycle e = 0;
    for (const auto& nd : nodes_) e = std::max(e, nd.rs_done);
    return e;
  }
  int sync_hops() const { return sync_hops_; }
  int data_hops() const { return data_hops_; }

 private:
  struct Node {
    std::uint64_t item = 0;    // next item to transmit
    std::uint64_t cursor = 0;  // next packet within it
    std::vector<std::uint32_t> acks;
    std::vector<bool> sent;
    std::vector<bool> flag_in;
    std::uint64_t flags_in = 0;
    std::uint64_t flags_out = 0;
    std::uint64_t rs_flags = 0;
    Cycle last_flag = 0;
    Cycle rs_done = 0;
  };

  int node_acc(int i) const { return s_.members[((i % n_) + n_) % n_]; }
  std::uint64_t chunk_of(int i, std::uint64_t r) const {
    const std::int64_t n = n_;
    std::int64_t c;
    if (r < static_cast<std::uint64_t>(n_ - 1)) {
      c = i - static_cast<std::int64_t>(r);
    } else {
      c = i + 1 - static_cast<std::int64_t>(r - (n_ - 1));
    }
    return static_cast<std::uint64_t>(((c % n) + n) % n);
  }
  bool ready(int i, std::uint64_t item, Cycle c) const {
    if (item < slices_) return s_.arrival[i] <= c;
    return nodes_[i].flag_in[item - slices_];
  }
  std::uint64_t slice_len(std::uint64_t j) const {
    return std::min(slice_bytes_, chunk_bytes_ - j * slice_bytes_);
  }

  void pump(int i, Cycle c) {
    const SimConfig& cfg = m_.config();
    Node& nd = nodes_[i];
    Endpoint& ep = m_.endpoint(s_.members[i]);
    while (nd.item < items_ && ready(i, nd.item, c)) {
      const std::uint64_t r = nd.item / slices_;
      const std::uint64_t j = nd.item % slices_;
      const std::uint64_t chunk = chunk_of(i, r);
      const std::uint64_t len = slice_len(j);
      const std::uint64_t packets = ceil_div(len, cfg.max_payload);
      const std::uint64_t src = kDataBase + chunk * chunk_bytes_ + j * slice_bytes_;
      const std::uint64_t dst = r < static_cast<std::uint64_t>(n_ - 1)
                                    ? kStagingBase + r * chunk_bytes_ + j * slice_bytes_
                                    : src;
      while (nd.cursor < packets) {
        const int sw = static_cast<int>(nd.cursor % cfg.num_switches);
        if (ep.tx_backlog(sw, QueueClass::WriteData) >= backlog_limit_) return;
        const std::uint64_t off = nd.cursor * cfg.max_payload;
        PacketHeader h;
        h.kind = PacketKind::WriteReq;
        h.dst = NodeId::acc(node_acc(i + 1));
        h.address = dst + off;
        h.length = static_cast<std::uint32_t>(std::min<std::uint64_t>(cfg.max_payload, len - off));
        h.tag = nd.item;
        ep.send(sw, h, ep.memory().at(src + off, h.length));
        ++nd.acks[nd.item];
        ++nd.cursor;
      }
      nd.sent[nd.item] = true;
      if (nd.acks[nd.item] == 0) send_flag(i, nd.item);
      ++nd.item;
      nd.cursor = 0;
    }
  }

  void send_flag(int i, std::uint64_t item) {
    const SimConfig& cfg = m_.config();
    constexpr std::uint64_t kSlots = (kFlagRegionBytes - 0x1000) / 8;
    PacketHeader h;
    h.kind = PacketKind::FlagWrite;
    h.dst = NodeId::acc(node_acc(i + 1));
    h.address = kFlagBase + 0x1000 + 8 * (item % kSlots);
    h.length = 8;
    h.tag = item;
    m_.endpoint(s_.members[i]).send(static_cast<int>(item % cfg.num_switches), h);
    ++nodes_[i].flags_out;
  }

  /// Adds the staged partial sum of round `r`, slice `j` into local data.
  void accumulate(int i, std::uint64_t r, std::uint64_t j) {
    AcceleratorMemory& mem = m_.endpoint(s_.members[i]).memory();
    const std::uint64_t chunk = chunk_of(i - 1, r);
    const std::uint64_t len = slice_len(j);
    std::uint8_t* local = mem.at(kDataBase + chunk * chunk_bytes_ + j * slice_bytes_, len);
    const std::uint8_t* staged = mem.at(kStagingBase + r * chunk_bytes_ + j * slice_bytes_, len);
    for (std::uint64_t b = 0; b < len; b += esize_) {
      const float sum = load(staged + b, s_.dtype) + load(local + b, s_.dtype);
      store(local + b, sum, s_.dtype);
    }
  }

  Machine& m_;
  const Setup& s_;
  int n_;
  std::uint32_t esize_ = 2;
  std::uint64_t chunk_bytes_ = 0;
  std::uint64_t slice_bytes_ = 0;
  std::uint64_t slices_ = 1;
  std::uint64_t rounds_ = 0;
  std::uint64_t items_ = 0;
  std::uint64_t backlog_limit_ = 0;
  std::vector<Node> nodes_;
  int sync_hops_ = 0;
  int data_hops_ = 0;
};

// ---------------------------------------------------------------------------
// Accelerator-driven multimem All-Reduce: start barrier, load-reduce of the
// local shard through the switches, multicast store, end barrier.

class NvlsDriver : public Driver, public EndpointListener {
 public:
  NvlsDriver(Machine& m, const Setup& s, std::uint64_t shard_bytes)
      : m_(m), s_(s), n_(static_cast<int>(s.members.size())), shard_bytes_(shard_bytes) {
    const SimConfig& cfg = m.config();
    packets_ = ceil_div(shard_bytes, cfg.max_payload);
    load_cap_ = std::max<std::uint64_t>(1, cfg.table_capacity / cfg.max_payload);
    nodes_.resize(n_);
    for (auto& nd : nodes_) nd.outstanding.assign(cfg.num_switches, 0);
    for (int a : s.members) m.endpoint(a).set_listener(this);
  }

  void tick(Cycle c) override {
    for (int i = 0; i < n_; ++i) {
      Node& nd = nodes_[i];
      if (nd.state == State::Waiting && s_.arrival[i] <= c) {
        barrier(i, 1);
        nd.state = State::StartBarrier;
      }
      if (nd.state == State::StartBarrier && nd.incs[0] == static_cast<std::uint32_t>(n_ - 1)) {
        nd.state = State::Loading;
        nd.t_start = c;
      }
      if (nd.state == State::Loading) issue_loads(i);
    }
  }
  bool finished() const override {
    return std::all_of(nodes_.begin(), nodes_.end(), [](const Node& nd) { return nd.state == State::Done; });
  }
  Cycle next_wake(Cycle now) const override {
    Cycle next = kNever;
    for (int i = 0; i < n_; ++i) {
      const Node& nd = nodes_[i];
      if (nd.state == State::Waiting) next = std::min(next, std::max(now, s_.arrival[i]));
      if (nd.state == State::StartBarrier && nd.incs[0] == static_cast<std::uint32_t>(n_ - 1)) next = now;
      if (nd.state == State::Loading && nd.next_packet < packets_) {
        const int sw = static_cast<int>(nd.next_packet % m_.config().num_switches);
        if (nd.outstanding[sw] < load_cap_) next = now;
      }
    }
    return next;
  }
  std::string describe() const override {
    std::ostringstream o;
    for (int i = 0; i < n_; ++i) {
      const Node& nd = nodes_[i];
      o << "multimem node " << i << ": state " << static_cast<int>(nd.state) << ", loads " << nd.loads_done << '/'
        << packets_ << ", store acks " << nd.store_acks << ", barrier incs " << nd.incs[0] << '/' << nd.incs[1]
        << '\n';
    }
    return o.str();
  }

  void on_packet(Endpoint& ep, int sw, const Packet& p, Cycle c) override {
    const int i = s_.rank[ep.index()];
    Node& nd = nodes_[i];
    const SimConfig& cfg = m_.config();
    switch (p.h.kind) {
      case PacketKind::AtomicInc: {
        max_into(sync_hops_, p.path_hops);
        const std::uint32_t epoch = p.h.instruction_id - 1;
        if (epoch > 1) throw ProtocolViolation("multimem barrier with unknown id");
        ++nd.incs[epoch];
        if (epoch == 1) maybe_done(i, c);
        break;
      }
      case PacketKind::WriteReq:
        max_into(data_hops_, p.path_hops);
        break;
      case PacketKind::ReadResp: {
        if (p.payload.size() != p.h.length) throw ProtocolViolation("multimem load returned a short payload");
        ep.memory().write(p.h.address, p.payload, p.h.instruction_id);
        --nd.outstanding[sw];
        ++nd.loads_done;
        nd.t_loads = c;
        max_into(data_hops_, p.path_hops);
        PacketHeader st;
        st.kind = PacketKind::WriteReq;
        st.multimem = true;
        st.dst = NodeId::sw(sw);
        st.address = p.h.address;
        st.length = p.h.length;
        st.tag = p.h.tag;
        st.instruction_id = p.h.instruction_id;
        ep.send(static_cast<int>(p.h.tag % cfg.num_switches), st, p.payload.data(), p.path_hops);
        break;
      }
      case PacketKind::WriteResp:
        if (++nd.store_acks == packets_) {
          nd.t_stores = c;
          nd.state = State::EndBarrier;
          barrier(i, 2);
          maybe_done(i, c);
        }
        break;
      default:
        break;
    }
  }

  Cycle phase_end(int k) const {
    Cycle e = 0;
    for (const auto& nd : nodes_) {
      const Cycle v = k == 0 ? nd.t_start : k == 1 ? nd.t_loads : k == 2 ? nd.t_stores : nd.t_done;
      e = std::max(e, v);
    }
    return e;
  }
  int sync_hops() const { return sync_hops_; }
  int data_hops() const { return data_hops_; }

 private:
  enum class State : std::uint8_t { Waiting, StartBarrier, Loading, EndBarrier, Done };
  struct Node {
    State state = State::Waiting;
    std::uint32_t incs[2] = {0, 0};
    std::uint64_t next_packet = 0;
    std::vector<std::uint64_t> outstanding;  // loads in flight, by switch
    std::uint64_t loads_done = 0;
    std::uint64_t store_acks = 0;
    Cycle t_start = 0, t_loads = 0, t_stores = 0, t_done = 0;
  };

  void barrier(int i, std::uint32_t id) {
    PacketHeader h;
    h.kind = PacketKind::AtomicInc;
    h.multimem = true;
    h.dst = NodeId::sw(0);
    h.instruction_id = id;
    m_.endpoint(s_.members[i]).send(0, h);
  }

  void maybe_done(int i, Cycle c) {
    Node& nd = nodes_[i];
    if (nd.state == State::EndBarrier && nd.incs[1] == static_cast<std::uint32_t>(n_ - 1)) {
      nd.state = State::Done;
      nd.t_done = c;
    }
  }

  void issue_loads(int i) {
    const SimConfig& cfg = m_.config();
    Node& nd = nodes_[i];
    Endpoint& ep = m_.endpoint(s_.members[i]);
    const std::uint64_t base = kDataBase + static_cast<std::uint64_t>(i) * shard_bytes_;
    while (nd.next_packet < packets_) {
      const std::uint64_t k = nd.next_packet;
      const int sw = static_cast<int>(k % cfg.num_switches);
      if (nd.outstanding[sw] >= load_cap_) break;
      PacketHeader h;
      h.kind = PacketKind::ReadReq;
      h.multimem = true;
      h.dst = NodeId::sw(sw);
      h.address = base + k * cfg.max_payload;
      h.length = static_cast<std::uint32_t>(std::min<std::uint64_t>(cfg.max_payload, shard_bytes_ - k * cfg.max_payload));
      h.tag = k;
      h.instruction_id = 1;
      ep.send(sw, h);
      ++nd.outstanding[sw];
      ++nd.next_packet;
    }
  }

  Machine& m_;
  const Setup& s_;
  int n_;
  std::uint64_t shard_bytes_;
  std::uint64_t packets_ = 0;
  std::uint64_t load_cap_ = 1;
  std::vector<Node> nodes_;
  int sync_hops_ = 0;
  int data_hops_ = 0;
};

Picoseconds cycles_to_time(const SimConfig& cfg, Cycle c) { return cfg.cycle_period() * static_cast<std::int64_t>(c); }

}  // namespace

// ---------------------------------------------------------------------------
// Inputs and reference results

Inputs make_inputs(std::uint64_t seed, int n, std::size_t elements, ElementType dtype, InputPattern pattern) {
  Inputs out(static_cast<std::size_t>(n), std::vector<float>(elements, 0.0f));
  SplitMix64 root(seed);
  for (int r = 0; r < n; ++r) {
    SplitMix64 rng = root.fork(static_cast<std::uint64_t>(r));
    auto& v = out[static_cast<std::size_t>(r)];
    for (std::size_t i = 0; i < elements; ++i) {
      switch (pattern) {
        case InputPattern::Gaussian: v[i] = static_cast<float>(rng.normal()); break;
        case InputPattern::Ones: v[i] = 1.0f; break;
        case InputPattern::Zeros: v[i] = 0.0f; break;
        case InputPattern::Integers: v[i] = static_cast<float>(static_cast<std::int64_t>(rng.below(17)) - 8); break;
      }
      v[i] = round_to(v[i], dtype);
    }
  }
  return out;
}

std::vector<float> tree_oracle(const Inputs& inputs, ElementType dtype) {
  if (inputs.empty()) return {};
  const std::size_t e = inputs.front().size();
  std::vector<float> out(e);
  std::vector<float> lane(inputs.size());
  for (std::size_t i = 0; i < e; ++i) {
    for (std::size_t k = 0; k < inputs.size(); ++k) lane[k] = inputs[k][i];
    out[i] = round_to(tree_reduce(std::span<float>(lane)), dtype);
  }
  return out;
}

std::vector<float> ring_oracle(const Inputs& inputs, std::size_t chunk_elements, ElementType dtype) {
  if (inputs.empty()) return {};
  const std::size_t n = inputs.size();
  const std::size_t e = inputs.front().size();
  std::vector<float> out(e);
  for (std::size_t i = 0; i < e; ++i) {
    const std::size_t c = i / chunk_elements;
    float acc = inputs[c % n][i];
    for (std::size_t k = 1; k < n; ++k) acc = round_to(inputs[(c + k) % n][i] + acc, dtype);
    out[i] = acc;
  }
  return out;
}

QuantBlockSpec inq_spec(const SimConfig& cfg) {
  QuantBlockSpec q;
  q.block_size = cfg.quant_block;
  q.bits = 8;
  q.scale_bytes = cfg.scale_bytes;
  return q;
}

std::vector<float> inq_oracle(const Inputs& inputs, const SimConfig& cfg) {
  return simulate_inq_path(inputs, inq_spec(cfg)).output;
}

std::vector<double> exact_sum(const Inputs& inputs) {
  if (inputs.empty()) return {};
  std::vector<double> out(inputs.front().size(), 0.0);
  for (const auto& v : inputs) {
    for (std::size_t i = 0; i < v.size(); ++i) out[i] += static_cast<double>(v[i]);
  }
  return out;
}

VerifyResult verify_result(const std::vector<std::vector<float>>& outputs, const std::vector<float>& golden,
                           const std::vector<double>* exact) {
  VerifyResult v;
  for (std::size_t r = 0; r < outputs.size(); ++r) {
    const auto& out = outputs[r];
    if (out.size() != golden.size()) {
      if (v.ok) {
        v.ok = false;
        v.rank = static_cast<int>(r);
        v.message = "rank " + std::to_string(r) + " produced " + std::to_string(out.size()) + " values, expected " +
                    std::to_string(golden.size());
      }
      continue;
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (exact) v.max_abs_error = std::max(v.max_abs_error, std::abs(static_cast<double>(out[i]) - (*exact)[i]));
      if (v.ok && std::bit_cast<std::uint32_t>(out[i]) != std::bit_cast<std::uint32_t>(golden[i]) &&
          !(std::isnan(out[i]) && std::isnan(golden[i]))) {
        v.ok = false;
        v.rank = static_cast<int>(r);
        v.first_mismatch = i;
        std::ostringstream o;
        o.precision(9);
        o << "rank " << r << " element " << i << ": got " << out[i] << ", expected " << golden[i];
        v.message = o.str();
      }
    }
  }
  return v;
}

std::vector<IsaInstruction> scin_program(const SimConfig& cfg, std::uint32_t id, std::uint64_t length,
                                         std::uint64_t participants, bool quantized) {
  IsaInstruction ins;
  ins.id = id;
  ins.length = length;
  ins.addresses.assign(cfg.num_accelerators, kDataBase);
  ins.source_mask = participants;
  ins.destination_mask = participants;
  ins.quant_enable = quantized;
  ins.dtype = quantized ? ElementType::Int8 : cfg.dtype;
  std::vector<IsaInstruction> prog{ins};
  if (quantized) {
    IsaInstruction sc;
    sc.id = id;
    sc.length = cfg.scale_bytes_for(length);
    sc.addresses.assign(cfg.num_accelerators, kScaleBase);
    sc.source_mask = participants;
    sc.destination_mask = participants;
    sc.is_scale_load = true;
    sc.dtype = ElementType::Int8;
    prog.push_back(sc);
  }
  return prog;
}

// ---------------------------------------------------------------------------
// Runners

RunReport run_scin_allreduce(const SimConfig& cfg, const CollectiveSpec& spec, const RunOptions& opts) {
  const bool inq = spec.algorithm == Algorithm::ScinInq;
  const ElementType dtype = inq ? ElementType::Fp16 : cfg.dtype;
  Setup s = prepare(cfg, spec, opts, element_size(dtype), dtype);
  if (s.members.size() < 2) throw ConfigError("participants", 0, "an All-Reduce needs at least two participants");
  const std::uint64_t mask = mask_of(s.members);
  const QuantBlockSpec qspec = inq_spec(cfg);

  // Quantized payloads are whole blocks of codes; the tail block is padded
  // with zeros, which leaves its scale unchanged.
  const std::uint64_t length =
      inq ? ceil_div(s.elements, cfg.quant_block) * cfg.quant_block : s.elements * element_size(dtype);

  Machine m(cfg, spec.seed);
  m.set_trace(opts.trace);
  for (std::size_t r = 0; r < s.members.size(); ++r) {
    AcceleratorMemory& mem = m.endpoint(s.members[r]).memory();
    mem.add_region("data", kDataBase, length);
    if (inq) {
      mem.add_region("scales", kScaleBase, cfg.scale_bytes_for(length));
      std::vector<float> padded = s.inputs[r];
      padded.resize(length, 0.0f);
      const QuantizedTensor q = quantize(padded, qspec);
      std::memcpy(mem.at(kDataBase, length), q.codes.data(), length);
      std::uint8_t* sp = mem.at(kScaleBase, cfg.scale_bytes_for(length));
      for (std::size_t b = 0; b < q.scales.size(); ++b) {
        if (cfg.scale_bytes == 2) {
          const std::uint16_t bits = scale_to_bits16(q.scales[b]);
          std::memcpy(sp + 2 * b, &bits, 2);
        } else {
          std::memcpy(sp + 4 * b, &q.scales[b], 4);
        }
      }
    } else {
      write_values(m, s.members[r], kDataBase, s.inputs[r], dtype);
    }
  }

  constexpr std::uint32_t kId = 1;
  const std::vector<IsaInstruction> prog = scin_program(cfg, kId, length, mask, inq);
  for (int sw = 0; sw < cfg.num_switches; ++sw) m.isa(sw).load(prog);
  ScinDriver driver(m, s, kId, participating_switches(length, cfg.wave_size, cfg.num_switches));
  m.set_driver(&driver);
  m.run();

  Cycle t1 = 0, t2 = 0, t3 = 0;
  for (int sw = 0; sw < cfg.num_switches; ++sw) {
    for (const auto& t : m.isa(sw).timings()) {
      if (t.id != kId || !t.participated) continue;
      t1 = std::max(t1, t.barrier_done);
      t2 = std::max(t2, t.last_write_resp);
    }
  }
  for (const auto& r : driver.resumed()) t3 = std::max(t3, *r);
  const Cycle t0 = s.t0;

  RunReport rep;
  rep.algorithm = to_string(spec.algorithm);
  rep.padding_bytes = inq ? (length - s.elements) : 0;
  rep.sync_overhead = cycles_to_time(cfg, (t1 - t0) + (t3 - t2));
  rep.data_time = cycles_to_time(cfg, t2 - t1);
  Cycle total;
  if (spec.include_sync) {
    total = t3 - t0;
    rep.per_phase_breakdown = {{"barrier", cycles_to_time(cfg, t1 - t0)},
                               {"data", cycles_to_time(cfg, t2 - t1)},
                               {"signal", cycles_to_time(cfg, t3 - t2)}};
  } else {
    total = t2 - t1;
    rep.per_phase_breakdown = {{"data", cycles_to_time(cfg, t2 - t1)}};
  }
  finish_report(rep, cfg, spec, m, s, total);
  rep.max_sync_hops = std::max(driver.sync_hops(), [&] {
    int h = 0;
    for (int sw = 0; sw < cfg.num_switches; ++sw) h = std::max(h, m.isa(sw).stats().max_atomic_hops);
    return h;
  }());
  rep.max_data_hops = driver.data_hops();

  std::vector<std::vector<float>> outputs;
  for (int a : s.members) {
    if (inq) {
      QuantizedTensor q;
      q.spec = qspec;
      q.codes.resize(length);
      std::memcpy(q.codes.data(), m.endpoint(a).memory().at(kDataBase, length), length);
      const std::uint8_t* sp = m.endpoint(a).memory().at(kScaleBase, cfg.scale_bytes_for(length));
      q.scales.resize(length / cfg.quant_block);
      for (std::size_t b = 0; b < q.scales.size(); ++b) {
        if (cfg.scale_bytes == 2) {
          std::uint16_t bits;
          std::memcpy(&bits, sp + 2 * b, 2);
          q.scales[b] = half_to_float(bits);
        } else {
          std::memcpy(&q.scales[b], sp + 4 * b, 4);
        }
      }
      std::vector<float> v = dequantize(q);
      v.resize(s.elements);
      outputs.push_back(std::move(v));
    } else {
      outputs.push_back(read_values(m, a, kDataBase, s.elements, dtype));
    }
  }
  if (opts.verify) {
    const std::vector<double> ex = exact_sum(s.inputs);
    apply_verification(rep, verify_result(outputs, inq ? inq_oracle(s.inputs, cfg) : tree_oracle(s.inputs, dtype),
                                          &ex));
  }
  if (opts.details) {
    opts.details->resume = driver.resumed();
    fill_details(opts.details, m, s, std::move(outputs));
  }
  return rep;
}

RunReport run_ring_allreduce(const SimConfig& cfg, const CollectiveSpec& spec, const RunOptions& opts) {
  const ElementType dtype = cfg.dtype;
  Setup s = prepare(cfg, spec, opts, element_size(dtype), dtype);
  const int n = static_cast<int>(s.members.size());
  if (n < 2) throw ConfigError("participants", 0, "an All-Reduce needs at least two participants");
  const std::uint32_t es = element_size(dtype);
  const std::size_t chunk = static_cast<std::size_t>(ceil_div(s.elements, static_cast<std::uint64_t>(n)));
  const std::uint64_t chunk_bytes = chunk * es;
  std::uint64_t slice = spec.chunking;
  if (slice != 0) slice = std::max<std::uint64_t>(es, slice / es * es);

  Machine m(cfg, spec.seed);
  m.set_trace(opts.trace);
  for (std::size_t r = 0; r < s.members.size(); ++r) {
    AcceleratorMemory& mem = m.endpoint(s.members[r]).memory();
    mem.add_region("data", kDataBase, chunk_bytes * n);
    mem.add_region("staging", kStagingBase, chunk_bytes * (n - 1));
    write_values(m, s.members[r], kDataBase, s.inputs[r], dtype);
  }
  RingDriver driver(m, s, chunk, slice);
  m.set_driver(&driver);
  m.run();

  const Cycle t0 = s.t0;
  const Cycle end = std::max(driver.end(), t0);
  const Cycle rs = std::clamp(driver.reduce_scatter_end(), t0, end);
  RunReport rep;
  rep.algorithm = to_string(spec.algorithm);
  rep.padding_bytes = chunk_bytes * n - spec.message_size;
  rep.per_phase_breakdown = {{"reduce_scatter", cycles_to_time(cfg, rs - t0)},
                             {"all_gather", cycles_to_time(cfg, end - rs)}};
  rep.data_time = cycles_to_time(cfg, end - t0);
  finish_report(rep, cfg, spec, m, s, end - t0);
  rep.max_sync_hops = driver.sync_hops();
  rep.max_data_hops = driver.data_hops();

  std::vector<std::vector<float>> outputs;
  for (int a : s.members) outputs.push_back(read_values(m, a, kDataBase, s.elements, dtype));
  if (opts.verify) {
    const std::vector<double> ex = exact_sum(s.inputs);
    apply_verification(rep, verify_result(outputs, ring_oracle(s.inputs, chunk, dtype), &ex));
  }
  if (opts.details) {
    opts.details->chunk_elements = chunk;
    fill_details(opts.details, m, s, std::move(outputs));
  }
  return rep;
}

RunReport run_nvls_like_allreduce(const SimConfig& cfg, const CollectiveSpec& spec, const RunOptions& opts) {
  const ElementType dtype = cfg.dtype;
  Setup s = prepare(cfg, spec, opts, element_size(dtype), dtype);
  const int n = static_cast<int>(s.members.size());
  if (n < 2) throw ConfigError("participants", 0, "an All-Reduce needs at least two participants");
  const std::uint32_t es = element_size(dtype);
  const std::uint64_t shard_bytes = ceil_div(s.elements, static_cast<std::uint64_t>(n)) * es;

  Machine m(cfg, spec.seed);
  m.set_trace(opts.trace);
  m.enable_nvls(mask_of(s.members));
  for (std::size_t r = 0; r < s.members.size(); ++r) {
    m.endpoint(s.members[r]).memory().add_region("data", kDataBase, shard_bytes * n);
    write_values(m, s.members[r], kDataBase, s.inputs[r], dtype);
  }
  NvlsDriver driver(m, s, shard_bytes);
  m.set_driver(&driver);
  m.run();

  const Cycle t0 = s.t0;
  const Cycle t1 = std::max(driver.phase_end(0), t0);
  const Cycle t2 = std::max(driver.phase_end(1), t1);
  const Cycle t3 = std::max(driver.phase_end(2), t2);
  const Cycle t4 = std::max(driver.phase_end(3), t3);
  RunReport rep;
  rep.algorithm = to_string(spec.algorithm);
  rep.padding_bytes = shard_bytes * n - spec.message_size;
  rep.sync_overhead = cycles_to_time(cfg, (t1 - t0) + (t4 - t3));
  rep.data_time = cycles_to_time(cfg, t3 - t1);
  Cycle total;
  if (spec.include_sync) {
    total = t4 - t0;
    rep.per_phase_breakdown = {{"barrier_start", cycles_to_time(cfg, t1 - t0)},
                               {"load_reduce", cycles_to_time(cfg, t2 - t1)},
                               {"multicast_store", cycles_to_time(cfg, t3 - t2)},
                               {"barrier_end", cycles_to_time(cfg, t4 - t3)}};
  } else {
    total = t3 - t1;
    rep.per_phase_breakdown = {{"load_reduce", cycles_to_time(cfg, t2 - t1)},
                               {"multicast_store", cycles_to_time(cfg, t3 - t2)}};
  }
  finish_report(rep, cfg, spec, m, s, total);
  rep.max_sync_hops = driver.sync_hops();
  rep.max_data_hops = driver.data_hops();

  std::vector<std::vector<float>> outputs;
  for (int a : s.members) outputs.push_back(read_values(m, a, kDataBase, s.elements, dtype));
  if (opts.verify) {
    const std::vector<double> ex = exact_sum(s.inputs);
    apply_verification(rep, verify_result(outputs, tree_oracle(s.inputs, dtype), &ex));
  }
  if (opts.details) fill_details(opts.details, m, s, std::move(outputs));
  return rep;
}

RunReport run_collective(const SimConfig& cfg, const CollectiveSpec& spec, const RunOptions& opts) {
  switch (spec.algorithm) {
    case Algorithm::Scin:
    case Algorithm::ScinInq:
      return run_scin_allreduce(cfg, spec, opts);
    case Algorithm::Ring:
      return run_ring_allreduce(cfg, spec, opts);
    case Algorithm::NvlsLike:
      return run_nvls_like_allreduce(cfg, spec, opts);
  }
  throw ConfigError("algorithm", 0, "unknown algorithm");
}

}  // namespace scinsim
