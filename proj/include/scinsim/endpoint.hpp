// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scinsim/config.hpp"
#include "scinsim/fabric.hpp"
#include "scinsim/packet.hpp"
#include "scinsim/rng.hpp"

namespace scinsim {

// Accelerator address map.
inline constexpr std::uint64_t kFlagBase = 0x0F00'0000;
inline constexpr std::uint64_t kDataBase = 0x1000'0000;
inline constexpr std::uint64_t kScaleBase = 0x2000'0000;
inline constexpr std::uint64_t kStagingBase = 0x3000'0000;
inline constexpr std::uint64_t kFlagRegionBytes = 0x10'0000;

inline std::uint64_t switch_flag_address(int sw) { return kFlagBase + 8 * static_cast<std::uint64_t>(sw); }

/// Sparse backing store made of named, non-overlapping regions.
class AcceleratorMemory {
 public:
  struct Region {
    std::string name;
    std::uint64_t base = 0;
    std::vector<std::uint8_t> bytes;
  };

  /// Throws ConfigError if the new region overlaps an existing one.
  Region& add_region(const std::string& name, std::uint64_t base, std::uint64_t size);
  Region* find(const std::string& name);
  const Region* find(const std::string& name) const;
  const std::vector<Region>& regions() const { return regions_; }

  /// Bounds-checked access. Out-of-range accesses raise SimulationError
  /// naming `instruction_id`.
  void check(std::uint64_t addr, std::uint64_t len, std::uint32_t instruction_id) const;
  void read(std::uint64_t addr, std::span<std::uint8_t> out, std::uint32_t instruction_id) const;
  void write(std::uint64_t addr, std::span<const std::uint8_t> in, std::uint32_t instruction_id);
  std::uint8_t* at(std::uint64_t addr, std::uint64_t len, std::uint32_t instruction_id = 0);

  std::uint64_t digest(std::uint64_t h) const;

 private:
  const Region& locate(std::uint64_t addr, std::uint64_t len, std::uint32_t instruction_id) const;
  std::vector<Region> regions_;
};

/// Response generator for one link. Requests become eligible `latency`
/// cycles after arrival; each response is drawn uniformly from the oldest
/// `window` eligible ones, so completion order is shuffled but seeded.
class DmaEngine {
 public:
  DmaEngine(Cycle latency, std::uint32_t engines, std::uint32_t window, SplitMix64 rng)
      : latency_(latency), engines_(engines), window_(window), rng_(rng) {}

  void submit(Cycle arrival, const PacketHeader& request);
  /// Moves newly eligible requests forward and returns up to `engines`
  /// requests to answer now, limited by `budget`.
  void service(Cycle c, std::size_t budget, std::vector<PacketHeader>& out);

  bool idle() const { return fifo_.empty() && eligible_.empty(); }
  Cycle next_wake(Cycle now) const;
  std::uint64_t served() const { return served_; }

 private:
  struct Pending {
    Cycle ready;
    PacketHeader request;
  };
  Cycle latency_;
  std::uint32_t engines_;
  std::uint32_t window_;
  SplitMix64 rng_;
  std::deque<Pending> fifo_;
  std::deque<PacketHeader> eligible_;
  std::uint64_t served_ = 0;
};

/// Flag polling state of one accelerator.
class SyncState {
 public:
  explicit SyncState(std::uint32_t poll_interval) : poll_(poll_interval) {}

  /// Enters the polling state for `instruction_id`, expecting `flags` flag
  /// writes. A second arrival for the same instruction is a violation.
  void arrive(std::uint32_t instruction_id, int flags, Cycle c);
  /// Records a flag write from switch `sw`. Returns the resume cycle once
  /// every expected flag is in.
  std::optional<Cycle> flag(std::uint32_t instruction_id, int sw, Cycle c);

  bool polling(std::uint32_t instruction_id) const;
  std::optional<Cycle> resumed_at(std::uint32_t instruction_id) const;
  std::uint32_t poll_interval() const { return poll_; }

 private:
  struct Entry {
    Cycle arrived = 0;
    int expected = 0;
    std::vector<int> seen;
    std::optional<Cycle> resumed;
  };
  std::uint32_t poll_;
  std::map<std::uint32_t, Entry> entries_;
};

class Endpoint;

/// Collective drivers running on the accelerator observe its traffic here.
class EndpointListener {
 public:
  virtual ~EndpointListener() = default;
  virtual void on_packet(Endpoint& ep, int sw, const Packet& p, Cycle c) = 0;
  virtual void on_resume(Endpoint& /*ep*/, std::uint32_t /*instruction_id*/, Cycle /*c*/) {}
};

class Endpoint : public EndpointPort {
 public:
  Endpoint(int index, const SimConfig& cfg, Fabric& fabric, SplitMix64 rng);

  int index() const { return index_; }
  NodeId node() const { return NodeId::acc(index_); }
  AcceleratorMemory& memory() { return memory_; }
  const AcceleratorMemory& memory() const { return memory_; }
  SyncState& sync() { return sync_; }
  void set_listener(EndpointListener* l) { listener_ = l; }

  void on_packet(int sw, PacketId id, Cycle c) override;
  void tick(Cycle c);

  /// Queues a packet from this accelerator on its link to switch `sw`.
  /// `payload` (if any) must hold `h.length` bytes.
  PacketId send(int sw, PacketHeader h, const std::uint8_t* payload = nullptr, int path_hops = 0);
  /// Flits waiting in the transmit queue of class `cls` on link `sw`.
  std::uint64_t tx_backlog(int sw, QueueClass cls) { return fabric_.endpoint_tx(index_, sw).occupancy(cls); }

  /// Arrival at a collective: one AtomicInc to each switch in `switches`,
  /// then poll for one flag per switch.
  void arrive(std::uint32_t instruction_id, const std::vector<int>& switches, Cycle c);

  bool idle() const;
  Cycle next_wake(Cycle now) const;
  /// Packets originated by this accelerator, by kind.
  const std::array<std::uint64_t, 7>& originated() const { return originated_; }
  std::uint64_t originated(PacketKind k) const { return originated_[static_cast<int>(k)]; }
  /// Payload bytes of data-carrying packets originated here.
  std::uint64_t originated_payload_bytes() const { return originated_bytes_; }

 private:
  int index_;
  const SimConfig& cfg_;
  Fabric& fabric_;
  AcceleratorMemory memory_;
  SyncState sync_;
  std::vector<DmaEngine> dma_;
  std::uint64_t tx_threshold_;
  EndpointListener* listener_ = nullptr;
  std::array<std::uint64_t, 7> originated_{};
  std::uint64_t originated_bytes_ = 0;
  std::vector<PacketHeader> scratch_;
};

}  // namespace scinsim
