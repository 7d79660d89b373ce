// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "scinsim/nvls.hpp"

#include <algorithm>
#include <cstring>

#include "scinsim/half.hpp"
#include "scinsim/reduction.hpp"

namespace scinsim {

NvlsUnit::NvlsUnit(int sw, const SimConfig& cfg, Fabric& fabric, std::uint64_t participants)
    : sw_(sw), cfg_(cfg), fabric_(fabric), rank_(cfg.num_accelerators, -1), buffered_(cfg.num_accelerators, 0) {
  for (int a = 0; a < cfg.num_accelerators; ++a) {
    if (participants >> a & 1) {
      rank_[a] = static_cast<int>(members_.size());
      members_.push_back(a);
    }
  }
  fabric_.set_agent(sw, this);
}

void NvlsUnit::send(int port, PacketHeader h, const std::uint8_t* payload, std::size_t len, std::uint8_t path_hops,
                    Cycle ready_at) {
  h.src = NodeId::sw(sw_);
  h.inc_flag = false;
  h.multimem = false;
  PacketPool& pool = fabric_.pool();
  const PacketId id = pool.make(h, sw_);
  Packet& p = pool[id];
  p.path_hops = path_hops;
  if (payload && len > 0) p.payload.assign(payload, payload + len);
  if (ready_at == 0) {
    fabric_.port(sw_, port).nvls_tx.push(id, p.flits, queue_class(h.kind), static_cast<int>(queue_class(h.kind)));
  } else {
    ready_.push_back(Ready{ready_at, id, port});
  }
}

bool NvlsUnit::accept(int port, PacketId id, Cycle c) {
  PacketPool& pool = fabric_.pool();
  Packet& p = pool[id];
  const PacketHeader& h = p.h;
  if (h.multimem) {
    if (rank_[port] < 0) throw ProtocolViolation("multimem operation from a non-participant");
    switch (h.kind) {
      case PacketKind::AtomicInc:
        for (int m : members_) {
          if (m == port) continue;
          PacketHeader f = h;
          f.dst = NodeId::acc(m);
          f.tag = static_cast<std::uint64_t>(port);
          send(m, f, nullptr, 0, p.path_hops, 0);
        }
        ++stats_.atomics_multicast;
        break;
      case PacketKind::ReadReq: {
        if (buffered_[port] + h.length > cfg_.table_capacity) return false;
        buffered_[port] += h.length;
        stats_.peak_buffered_bytes = std::max(stats_.peak_buffered_bytes, buffered_[port]);
        const std::uint64_t key = next_key_++;
        Load load{port, h, 0, 0, std::vector<std::vector<std::uint8_t>>(members_.size())};
        loads_.emplace(key, std::move(load));
        for (int m : members_) {
          PacketHeader r;
          r.kind = PacketKind::ReadReq;
          r.dst = NodeId::acc(m);
          r.address = h.address;
          r.length = h.length;
          r.tag = key;
          r.instruction_id = h.instruction_id;
          send(m, r, nullptr, 0, 0, 0);
        }
        break;
      }
      case PacketKind::WriteReq: {
        const std::uint64_t key = next_key_++;
        Store st{port, h, static_cast<std::uint32_t>(members_.size() - 1)};
        for (int m : members_) {
          if (m == port) continue;
          PacketHeader w = h;
          w.dst = NodeId::acc(m);
          w.tag = key;
          send(m, w, p.payload.data(), p.payload.size(), p.path_hops, 0);
        }
        ++stats_.stores_multicast;
        if (st.pending == 0) {
          PacketHeader ack;
          ack.kind = PacketKind::WriteResp;
          ack.dst = NodeId::acc(port);
          ack.address = h.address;
          ack.length = h.length;
          ack.tag = h.tag;
          ack.instruction_id = h.instruction_id;
          send(port, ack, nullptr, 0, 0, 0);
        } else {
          stores_.emplace(key, st);
        }
        break;
      }
      default:
        throw ProtocolViolation(std::string("unsupported multimem operation ") + to_string(h.kind));
    }
    pool.release(id);
    return true;
  }

  switch (h.kind) {
    case PacketKind::ReadResp: {
      auto it = loads_.find(h.tag);
      if (it == loads_.end()) throw ProtocolViolation("multimem read response with unknown tag");
      Load& load = it->second;
      const int r = rank_[port];
      if (r < 0 || !load.parts[r].empty() || p.payload.size() != load.request.length) {
        throw ProtocolViolation("malformed multimem read response");
      }
      load.parts[r] = p.payload;
      load.path_hops = std::max(load.path_hops, p.path_hops);
      if (++load.received == members_.size()) finish_load(h.tag, c);
      break;
    }
    case PacketKind::WriteResp: {
      auto it = stores_.find(h.tag);
      if (it == stores_.end()) throw ProtocolViolation("multimem write response with unknown tag");
      Store& st = it->second;
      if (--st.pending == 0) {
        PacketHeader ack;
        ack.kind = PacketKind::WriteResp;
        ack.dst = NodeId::acc(st.initiator);
        ack.address = st.request.address;
        ack.length = st.request.length;
        ack.tag = st.request.tag;
        ack.instruction_id = st.request.instruction_id;
        send(st.initiator, ack, nullptr, 0, 0, 0);
        stores_.erase(it);
      }
      break;
    }
    default:
      throw ProtocolViolation(std::string("switch cannot consume ") + to_string(h.kind));
  }
  pool.release(id);
  return true;
}

void NvlsUnit::finish_load(std::uint64_t key, Cycle c) {
  Load load = std::move(loads_.at(key));
  loads_.erase(key);
  const std::size_t len = load.request.length;
  std::vector<std::uint8_t> out(len);
  const std::size_t ns = members_.size();
  lane_.resize(ns);
  if (cfg_.dtype == ElementType::Fp16) {
    for (std::size_t i = 0; i + 2 <= len; i += 2) {
      for (std::size_t k = 0; k < ns; ++k) {
        std::uint16_t v;
        std::memcpy(&v, load.parts[k].data() + i, 2);
        lane_[k] = half_to_float(v);
      }
      const std::uint16_t r = float_to_half(tree_reduce(std::span<float>(lane_)));
      std::memcpy(out.data() + i, &r, 2);
    }
  } else {
    for (std::size_t i = 0; i + 4 <= len; i += 4) {
      for (std::size_t k = 0; k < ns; ++k) std::memcpy(&lane_[k], load.parts[k].data() + i, 4);
      const float r = tree_reduce(std::span<float>(lane_));
      std::memcpy(out.data() + i, &r, 4);
    }
  }
  buffered_[load.initiator] -= len;
  ++stats_.loads_reduced;
  PacketHeader resp;
  resp.kind = PacketKind::ReadResp;
  resp.dst = NodeId::acc(load.initiator);
  resp.address = load.request.address;
  resp.length = load.request.length;
  resp.tag = load.request.tag;
  resp.instruction_id = load.request.instruction_id;
  send(load.initiator, resp, out.data(), out.size(), load.path_hops, c + cfg_.isa_compute_latency_regular);
}

void NvlsUnit::tick(Cycle c) {
  while (!ready_.empty() && ready_.front().at <= c) {
    const Ready r = ready_.front();
    ready_.pop_front();
    const Packet& p = fabric_.pool()[r.id];
    fabric_.port(sw_, r.port).nvls_tx.push(r.id, p.flits, queue_class(p.h.kind),
                                           static_cast<int>(queue_class(p.h.kind)));
  }
}

Cycle NvlsUnit::next_wake(Cycle now) const {
  if (ready_.empty()) return kNever;
  return std::max(now, ready_.front().at);
}

}  // namespace scinsim
