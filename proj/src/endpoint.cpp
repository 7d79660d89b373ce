// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "scinsim/endpoint.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>

namespace scinsim {

namespace {

std::string hex(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// AcceleratorMemory

AcceleratorMemory::Region& AcceleratorMemory::add_region(const std::string& name, std::uint64_t base,
                                                         std::uint64_t size) {
  if (base + size > kAddressMask + 1) throw ConfigError(name, 0, "region exceeds the 48-bit address space");
  for (const auto& r : regions_) {
    const bool disjoint = base + size <= r.base || r.base + r.bytes.size() <= base;
    if (!disjoint) throw ConfigError(name, 0, "region overlaps '" + r.name + "'");
    if (r.name == name) throw ConfigError(name, 0, "duplicate region name");
  }
  regions_.push_back(Region{name, base, std::vector<std::uint8_t>(size, 0)});
  return regions_.back();
}

AcceleratorMemory::Region* AcceleratorMemory::find(const std::string& name) {
  for (auto& r : regions_) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

const AcceleratorMemory::Region* AcceleratorMemory::find(const std::string& name) const {
  for (const auto& r : regions_) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

const AcceleratorMemory::Region& AcceleratorMemory::locate(std::uint64_t addr, std::uint64_t len,
                                                           std::uint32_t instruction_id) const {
  for (const auto& r : regions_) {
    if (addr >= r.base && addr + len <= r.base + r.bytes.size()) return r;
  }
  throw SimulationError("instruction " + std::to_string(instruction_id) + ": access of " + std::to_string(len) +
                        " bytes at " + hex(addr) + " is outside every memory region");
}

void AcceleratorMemory::check(std::uint64_t addr, std::uint64_t len, std::uint32_t instruction_id) const {
  (void)locate(addr, len, instruction_id);
}

void AcceleratorMemory::read(std::uint64_t addr, std::span<std::uint8_t> out, std::uint32_t instruction_id) const {
  const Region& r = locate(addr, out.size(), instruction_id);
  if (!out.empty()) std::memcpy(out.data(), r.bytes.data() + (addr - r.base), out.size());
}

void AcceleratorMemory::write(std::uint64_t addr, std::span<const std::uint8_t> in, std::uint32_t instruction_id) {
  const Region& r = locate(addr, in.size(), instruction_id);
  auto& bytes = const_cast<Region&>(r).bytes;
  if (!in.empty()) std::memcpy(bytes.data() + (addr - r.base), in.data(), in.size());
}

std::uint8_t* AcceleratorMemory::at(std::uint64_t addr, std::uint64_t len, std::uint32_t instruction_id) {
  const Region& r = locate(addr, len, instruction_id);
  return const_cast<Region&>(r).bytes.data() + (addr - r.base);
}

std::uint64_t AcceleratorMemory::digest(std::uint64_t h) const {
  for (const auto& r : regions_) {
    if (r.name == "flags" || r.name == "staging") continue;
    h = fnv1a(r.bytes.data(), r.bytes.size(), h);
  }
  return h;
}

// ---------------------------------------------------------------------------
// DmaEngine

void DmaEngine::submit(Cycle arrival, const PacketHeader& request) {
  fifo_.push_back(Pending{arrival + latency_, request});
}

void DmaEngine::service(Cycle c, std::size_t budget, std::vector<PacketHeader>& out) {
  out.clear();
  while (!fifo_.empty() && fifo_.front().ready <= c) {
    eligible_.push_back(fifo_.front().request);
    fifo_.pop_front();
  }
  const std::size_t n = std::min<std::size_t>(budget, engines_);
  while (out.size() < n && !eligible_.empty()) {
    const std::size_t span = std::min<std::size_t>(window_, eligible_.size());
    const std::size_t pick = span > 1 ? static_cast<std::size_t>(rng_.below(span)) : 0;
    out.push_back(eligible_[pick]);
    eligible_.erase(eligible_.begin() + static_cast<std::ptrdiff_t>(pick));
    ++served_;
  }
}

Cycle DmaEngine::next_wake(Cycle now) const {
  if (!eligible_.empty()) return now;
  if (!fifo_.empty()) return std::max(now, fifo_.front().ready);
  return kNever;
}

// ---------------------------------------------------------------------------
// SyncState

void SyncState::arrive(std::uint32_t instruction_id, int flags, Cycle c) {
  if (entries_.count(instruction_id)) {
    throw ProtocolViolation("double arrival at collective " + std::to_string(instruction_id));
  }
  Entry e;
  e.arrived = c;
  e.expected = flags;
  entries_.emplace(instruction_id, std::move(e));
}

std::optional<Cycle> SyncState::flag(std::uint32_t instruction_id, int sw, Cycle c) {
  auto it = entries_.find(instruction_id);
  if (it == entries_.end()) {
    throw ProtocolViolation("flag for collective " + std::to_string(instruction_id) + " before arrival");
  }
  Entry& e = it->second;
  if (std::find(e.seen.begin(), e.seen.end(), sw) != e.seen.end() || e.resumed) {
    throw ProtocolViolation("flag for collective " + std::to_string(instruction_id) + " from switch " +
                            std::to_string(sw) + " arrived twice");
  }
  e.seen.push_back(sw);
  if (static_cast<int>(e.seen.size()) < e.expected) return std::nullopt;
  e.resumed = ceil_div(c, poll_) * poll_;
  return e.resumed;
}

bool SyncState::polling(std::uint32_t instruction_id) const {
  auto it = entries_.find(instruction_id);
  return it != entries_.end() && !it->second.resumed;
}

std::optional<Cycle> SyncState::resumed_at(std::uint32_t instruction_id) const {
  auto it = entries_.find(instruction_id);
  if (it == entries_.end()) return std::nullopt;
  return it->second.resumed;
}

// ---------------------------------------------------------------------------
// Endpoint

Endpoint::Endpoint(int index, const SimConfig& cfg, Fabric& fabric, SplitMix64 rng)
    : index_(index), cfg_(cfg), fabric_(fabric), sync_(cfg.poll_interval) {
  memory_.add_region("flags", kFlagBase, kFlagRegionBytes);
  for (int s = 0; s < cfg.num_switches; ++s) {
    dma_.emplace_back(cfg.response_latency_cycles(), cfg.dma_engines, cfg.reorder_window, rng.fork(s));
  }
  const FlitRate rate = cfg.flit_rate();
  tx_threshold_ = std::max<std::uint64_t>(2, 2 * ceil_div(rate.num, rate.den));
  fabric_.set_endpoint(index, this);
}

PacketId Endpoint::send(int sw, PacketHeader h, const std::uint8_t* payload, int path_hops) {
  h.src = node();
  PacketPool& pool = fabric_.pool();
  const PacketId id = pool.make(h, sw);
  Packet& p = pool[id];
  p.path_hops = static_cast<std::uint8_t>(path_hops);
  if (payload && h.length > 0) p.payload.assign(payload, payload + h.length);
  const QueueClass cls = queue_class(h.kind);
  const int qid = (h.inc_flag ? kNumClasses : 0) + static_cast<int>(cls);
  fabric_.endpoint_tx(index_, sw).push(id, p.flits, cls, qid);
  ++originated_[static_cast<int>(h.kind)];
  if (carries_payload(h.kind)) originated_bytes_ += h.length;
  return id;
}

void Endpoint::arrive(std::uint32_t instruction_id, const std::vector<int>& switches, Cycle c) {
  sync_.arrive(instruction_id, static_cast<int>(switches.size()), c);
  for (int s : switches) {
    PacketHeader h;
    h.kind = PacketKind::AtomicInc;
    h.inc_flag = true;
    h.dst = NodeId::sw(s);
    h.instruction_id = instruction_id;
    send(s, h);
  }
}

void Endpoint::on_packet(int sw, PacketId id, Cycle c) {
  PacketPool& pool = fabric_.pool();
  Packet& p = pool[id];
  const PacketHeader& h = p.h;
  switch (h.kind) {
    case PacketKind::ReadReq:
      memory_.check(h.address, h.length, h.instruction_id);
      dma_[sw].submit(c, h);
      break;
    case PacketKind::WriteReq:
    case PacketKind::ScaleData:
      if (p.payload.size() != h.length) throw ProtocolViolation("write payload does not match its length field");
      memory_.write(h.address, p.payload, h.instruction_id);
      dma_[sw].submit(c, h);
      break;
    case PacketKind::FlagWrite: {
      const std::uint64_t one = 1;
      memory_.write(h.address, std::span(reinterpret_cast<const std::uint8_t*>(&one), 8), h.instruction_id);
      if (h.src.is_switch() && h.inc_flag) {
        if (auto resume = sync_.flag(h.instruction_id, sw, c); resume && listener_) {
          listener_->on_resume(*this, h.instruction_id, *resume);
        }
      }
      break;
    }
    case PacketKind::AtomicInc:
    case PacketKind::ReadResp:
    case PacketKind::WriteResp:
      break;
  }
  if (listener_) listener_->on_packet(*this, sw, p, c);
  pool.release(id);
}

void Endpoint::tick(Cycle c) {
  for (int s = 0; s < static_cast<int>(dma_.size()); ++s) {
    if (dma_[s].idle()) continue;
    TxSource& tx = fabric_.endpoint_tx(index_, s);
    for (std::uint32_t k = 0; k < cfg_.dma_engines; ++k) {
      if (tx.occupancy(QueueClass::Response) >= tx_threshold_) break;
      dma_[s].service(c, 1, scratch_);
      if (scratch_.empty()) break;
      const PacketHeader& req = scratch_.front();
      PacketHeader r;
      r.inc_flag = req.inc_flag;
      r.dst = req.src;
      r.address = req.address;
      r.tag = req.tag;
      r.instruction_id = req.instruction_id;
      if (req.kind == PacketKind::ReadReq) {
        r.kind = PacketKind::ReadResp;
        r.length = req.length;
        send(s, r, memory_.at(req.address, req.length, req.instruction_id));
      } else {
        r.kind = PacketKind::WriteResp;
        r.length = req.length;
        send(s, r);
      }
    }
  }
}

bool Endpoint::idle() const {
  return std::all_of(dma_.begin(), dma_.end(), [](const DmaEngine& d) { return d.idle(); });
}

Cycle Endpoint::next_wake(Cycle now) const {
  Cycle next = kNever;
  for (const auto& d : dma_) next = std::min(next, d.next_wake(now));
  return next;
}

}  // namespace scinsim
