// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "scinsim/config.hpp"
#include "scinsim/fabric.hpp"

namespace scinsim {

/// Collective descriptor executed by the in-switch accelerator.
struct IsaInstruction {
  std::uint32_t id = 0;
  std::uint64_t length = 0;              // bytes; int8 code bytes when quantized
  std::vector<std::uint64_t> addresses;  // one per accelerator
  std::uint64_t source_mask = 0;
  std::uint64_t destination_mask = 0;
  bool quant_enable = false;
  bool is_scale_load = false;  // carries scale-factor addresses for the preceding instruction
  ElementType dtype = ElementType::Fp16;

  std::uint64_t participants() const { return source_mask | destination_mask; }
};

/// Throws ConfigError describing the first malformed instruction.
void validate_program(const std::vector<IsaInstruction>& program, const SimConfig& cfg);

/// Waves of an instruction handled by switch `sw`: wave w goes to w mod M.
std::vector<std::uint64_t> waves_for_switch(std::uint64_t length, std::uint64_t wave_size, int sw, int switches);
/// Switches holding at least one wave of a `length`-byte instruction.
std::vector<int> participating_switches(std::uint64_t length, std::uint64_t wave_size, int switches);

enum class EntryState : std::uint8_t { Idle, Waiting, Ready };

struct WaveEntry {
  EntryState state = EntryState::Idle;
  std::uint64_t wave = 0;
  std::uint64_t base_address = 0;
  std::uint32_t expected = 0;
  std::uint32_t filled = 0;
  std::vector<std::uint64_t> fill;  // one bit per expected packet
  std::vector<std::uint8_t> data;
  std::vector<std::uint8_t> scales;
};

struct InstructionTiming {
  std::uint32_t id = 0;
  bool participated = false;
  Cycle barrier_done = 0;
  Cycle last_write_resp = 0;
  Cycle flags_sent = 0;
};

struct IsaStats {
  std::uint64_t read_requests = 0;
  std::uint64_t write_requests = 0;
  std::uint64_t scale_packets = 0;
  std::uint64_t flag_writes = 0;
  std::uint64_t waves_reduced = 0;
  std::uint64_t peak_entries = 0;        // per table
  std::uint64_t peak_buffered_bytes = 0;  // per table, data only
  int max_atomic_hops = 0;
};

/// In-switch accelerator of one switch. Runs a program of instructions in
/// order: barrier on AtomicInc arrivals, wave-regulated reads into
/// per-source wave tables, tree reduction (optionally dequantize, reduce,
/// requantize), write-back to destinations, and a flag write per
/// destination once every write is acknowledged.
class Isa {
 public:
  Isa(int sw, const SimConfig& cfg, Fabric& fabric);

  void load(std::vector<IsaInstruction> program);
  void tick(Cycle c);

  bool done() const { return current_ >= program_.size() && out_.empty(); }
  bool idle(Cycle c) const;
  Cycle next_wake(Cycle now) const;
  const std::vector<InstructionTiming>& timings() const { return timings_; }
  const IsaStats& stats() const { return stats_; }
  /// Current wave-table entry occupancy (same for every source table).
  std::size_t entries_in_use() const { return entries_in_use_; }
  std::string describe() const;

 private:
  struct PendingOutput {
    Cycle ready;
    std::uint64_t wave;
    std::vector<std::uint8_t> data;
    std::vector<std::uint8_t> scales;
    std::uint8_t path_hops;
  };

  void handle(int port, PacketId id, Cycle c);
  void on_read_response(int port, const Packet& p, Cycle c);
  void try_start(Cycle c);
  void issue(Cycle c);
  void enter_pipeline(std::uint32_t entry, Cycle c);
  void emit(const PendingOutput& out);
  void finish_if_complete(Cycle c);
  void advance_program();
  std::size_t current_timing_index() const;
  void send(int port, PacketHeader h, QueueClass cls, const std::uint8_t* payload, std::uint8_t path_hops);

  std::uint64_t wave_bytes(std::uint64_t wave) const;
  std::uint32_t packets_in(std::uint64_t bytes) const;
  std::uint64_t scale_bytes_of(std::uint64_t wave) const;

  int sw_;
  const SimConfig& cfg_;
  Fabric& fabric_;
  int n_;

  std::vector<IsaInstruction> program_;
  std::size_t current_ = 0;
  std::map<std::uint32_t, int> barrier_counts_;
  std::map<std::uint32_t, int> barrier_targets_;

  // State of the running instruction.
  bool running_ = false;
  const IsaInstruction* ins_ = nullptr;
  const IsaInstruction* scale_ins_ = nullptr;
  std::vector<int> sources_;
  std::vector<int> destinations_;
  std::vector<std::uint64_t> waves_;
  std::size_t next_wave_ = 0;
  std::size_t waves_emitted_ = 0;
  std::uint64_t outstanding_acks_ = 0;
  std::uint32_t packets_per_wave_ = 0;
  std::uint64_t next_tag_ = 0;

  std::vector<std::vector<WaveEntry>> tables_;  // [accelerator][entry]
  std::vector<std::uint32_t> ready_sources_;    // per entry
  std::vector<std::uint8_t> entry_path_hops_;   // per entry
  std::set<std::uint32_t> free_entries_;
  std::size_t entries_in_use_ = 0;
  std::deque<PendingOutput> out_;

  std::vector<InstructionTiming> timings_;
  IsaStats stats_;
  std::vector<float> lane_;
};

}  // namespace scinsim
