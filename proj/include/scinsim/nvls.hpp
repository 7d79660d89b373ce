// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <deque>
#include <unordered_map>
#include <vector>

#include "scinsim/config.hpp"
#include "scinsim/fabric.hpp"

namespace scinsim {

struct NvlsStats {
  std::uint64_t loads_reduced = 0;
  std::uint64_t stores_multicast = 0;
  std::uint64_t atomics_multicast = 0;
  std::uint64_t peak_buffered_bytes = 0;  // per initiator port
};

/// Switch-side multimem engine used by the accelerator-driven baseline.
///  - multimem AtomicInc: forwarded to every other participant.
///  - multimem ReadReq: read from every participant, reduced in a per-port
///    buffer in fixed tree order, returned to the initiator.
///  - multimem WriteReq: multicast to every other participant; their write
///    responses are combined into one for the initiator.
class NvlsUnit : public SwitchAgent {
 public:
  NvlsUnit(int sw, const SimConfig& cfg, Fabric& fabric, std::uint64_t participants);

  bool accept(int port, PacketId id, Cycle c) override;
  void tick(Cycle c);

  bool idle() const { return loads_.empty() && stores_.empty() && ready_.empty(); }
  Cycle next_wake(Cycle now) const;
  const NvlsStats& stats() const { return stats_; }

 private:
  struct Load {
    int initiator;
    PacketHeader request;
    std::uint32_t received = 0;
    std::uint8_t path_hops = 0;
    std::vector<std::vector<std::uint8_t>> parts;  // by participant rank
  };
  struct Store {
    int initiator;
    PacketHeader request;
    std::uint32_t pending = 0;
  };
  struct Ready {
    Cycle at;
    PacketId id;
    int port;
  };

  void send(int port, PacketHeader h, const std::uint8_t* payload, std::size_t len, std::uint8_t path_hops,
            Cycle ready_at);
  void finish_load(std::uint64_t key, Cycle c);

  int sw_;
  const SimConfig& cfg_;
  Fabric& fabric_;
  std::vector<int> members_;
  std::vector<int> rank_;  // accelerator -> rank in members_, -1 if absent
  std::vector<std::uint64_t> buffered_;  // per initiator port
  std::unordered_map<std::uint64_t, Load> loads_;
  std::unordered_map<std::uint64_t, Store> stores_;
  std::deque<Ready> ready_;
  std::uint64_t next_key_ = 0;
  NvlsStats stats_;
  std::vector<float> lane_;
};

}  // namespace scinsim
