// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <limits>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "scinsim/config.hpp"
#include "scinsim/packet.hpp"

namespace scinsim {

inline constexpr Cycle kNever = std::numeric_limits<Cycle>::max();

/// CSV trace writer: cycle,port,queue,event.
class TraceSink {
 public:
  explicit TraceSink(std::ostream* out) : out_(out) {}
  bool enabled() const { return out_ != nullptr; }
  void header();
  void event(Cycle c, const std::string& port, const char* queue, const char* event, const Packet& p);

 private:
  std::ostream* out_;
};

struct TxEntry {
  PacketId id = kNoPacket;
  std::uint32_t flits = 0;
  std::uint8_t qid = 0;  // downstream receive queue
};

/// One traffic source feeding a channel: a FIFO per queue class. A source
/// finishes a packet before starting its next one.
class TxSource {
 public:
  explicit TxSource(std::string name, std::uint64_t class_limit_flits = 0)
      : name_(std::move(name)), limit_(class_limit_flits) {}

  bool has_space(QueueClass cls, std::uint32_t flits) const {
    return limit_ == 0 || occupancy_[static_cast<int>(cls)] + flits <= limit_;
  }
  void push(PacketId id, std::uint32_t flits, QueueClass cls, int downstream_qid);

  bool idle() const { return !active_ && queued_packets() == 0; }
  std::size_t queued_packets() const { return q_[0].size() + q_[1].size() + q_[2].size(); }
  std::size_t queued(QueueClass cls) const { return q_[static_cast<int>(cls)].size(); }
  std::uint64_t occupancy(QueueClass cls) const { return occupancy_[static_cast<int>(cls)]; }
  std::uint64_t peak_occupancy() const { return peak_; }
  std::uint64_t flits_sent() const { return flits_sent_; }
  const std::string& name() const { return name_; }

 private:
  friend class Channel;

  std::string name_;
  std::uint64_t limit_;
  std::array<std::deque<TxEntry>, kNumClasses> q_;
  std::array<std::uint64_t, kNumClasses> occupancy_{};
  std::uint64_t peak_ = 0;
  TxEntry cur_;
  int cur_class_ = 0;
  bool active_ = false;
  std::uint32_t remaining_ = 0;
  int next_class_ = 0;
  std::uint64_t flits_sent_ = 0;
};

/// One direction of a link. Flits leave at the channel's exact flit rate,
/// chosen round-robin among the attached sources; a packet arrives
/// `latency` cycles after its tail flit leaves. Credits are held per
/// downstream queue and come back `latency` cycles after release.
class Channel {
 public:
  Channel(std::string name, Cycle latency, FlitRate rate, int num_queues, std::uint32_t depth);

  void add_source(TxSource* src) { sources_.push_back(src); }
  const std::string& name() const { return name_; }
  Cycle latency() const { return latency_; }

  bool arrival_due(Cycle c) const { return !flights_.empty() && flights_.front().arrive <= c; }
  PacketId pop_arrival();

  void return_credit(Cycle now, int qid, std::uint32_t flits);
  void absorb_credits(Cycle c);
  std::uint32_t credits(int qid) const { return credits_[qid]; }
  std::uint32_t depth() const { return depth_; }

  void transmit(Cycle c, PacketPool& pool, TraceSink& trace);

  std::uint64_t flits_sent() const { return flits_sent_; }
  std::uint64_t flits_delivered() const { return flits_delivered_; }
  std::uint64_t flits_in_flight() const { return in_flight_; }
  std::uint64_t packets_sent() const { return packets_sent_; }
  bool sources_idle() const;
  bool idle() const { return flights_.empty() && credit_returns_.empty() && sources_idle(); }
  Cycle next_event() const;
  std::size_t packets_in_flight() const { return flights_.size(); }

 private:
  struct Flight {
    Cycle arrive;
    PacketId id;
    std::uint32_t flits;
  };
  struct CreditReturn {
    Cycle arrive;
    std::uint8_t qid;
    std::uint32_t flits;
  };

  bool can_send(TxSource& s) const;
  bool start_packet(TxSource& s);

  std::string name_;
  Cycle latency_;
  FlitRate rate_;
  std::uint32_t depth_;
  std::vector<std::uint32_t> credits_;
  std::vector<TxSource*> sources_;
  std::size_t rr_ = 0;
  std::deque<Flight> flights_;
  std::deque<CreditReturn> credit_returns_;
  std::uint64_t flits_sent_ = 0;
  std::uint64_t flits_delivered_ = 0;
  std::uint64_t in_flight_ = 0;
  std::uint64_t packets_sent_ = 0;
};

struct RxQueue {
  std::deque<PacketId> q;
  std::uint64_t flits = 0;
  std::uint64_t peak = 0;
};

/// Queues of one switch port: a forwarding set and an in-switch compute set,
/// selected by the packet's INC flag. The third transmit source belongs to
/// the switch's multimem unit.
struct PortQueues {
  PortQueues(const std::string& name, std::uint64_t depth)
      : switch_tx(name + ".switch_tx", depth), isa_tx(name + ".isa_tx"), nvls_tx(name + ".nvls_tx") {}

  std::array<RxQueue, kNumClasses> switch_rx;
  std::array<RxQueue, kNumClasses> isa_rx;
  TxSource switch_tx;
  TxSource isa_tx;
  TxSource nvls_tx;
};

/// Receives packets addressed to the switch itself (multimem operations and
/// their replies) from the crossbar.
class SwitchAgent {
 public:
  virtual ~SwitchAgent() = default;
  /// Returns false to leave the packet queued (backpressure).
  virtual bool accept(int port, PacketId id, Cycle c) = 0;
};

class EndpointPort {
 public:
  virtual ~EndpointPort() = default;
  virtual void on_packet(int sw, PacketId id, Cycle c) = 0;
};

struct FabricStats {
  std::uint64_t flits_injected = 0;
  std::uint64_t flits_delivered = 0;
  std::uint64_t flits_in_flight = 0;
};

/// Star topology: every accelerator has one link to every switch. Owns the
/// channels and switch port queues and moves packets between them.
class Fabric {
 public:
  Fabric(const SimConfig& cfg, PacketPool& pool);

  int accelerators() const { return n_; }
  int switches() const { return m_; }

  Channel& up(int a, int s) { return *up_[a * m_ + s]; }
  Channel& down(int s, int a) { return *down_[s * n_ + a]; }
  const Channel& up(int a, int s) const { return *up_[a * m_ + s]; }
  const Channel& down(int s, int a) const { return *down_[s * n_ + a]; }
  PortQueues& port(int s, int a) { return *ports_[s * n_ + a]; }
  const PortQueues& port(int s, int a) const { return *ports_[s * n_ + a]; }
  TxSource& endpoint_tx(int a, int s) { return *endpoint_tx_[a * m_ + s]; }

  void set_endpoint(int a, EndpointPort* ep) { endpoints_[a] = ep; }
  void set_agent(int s, SwitchAgent* agent) { agents_[s] = agent; }
  void set_trace(std::ostream* out);

  /// Arrivals and credit returns due this cycle.
  void deliver(Cycle c);
  /// Store-and-forward switching from forwarding RX queues to TX queues.
  void crossbar(Cycle c);
  void transmit(Cycle c);

  /// Removes the head of an ISA RX queue and returns its credits upstream.
  PacketId pop_isa_rx(int s, int a, QueueClass cls, Cycle c);

  FabricStats stats() const;
  bool quiescent() const;
  Cycle next_event() const;
  std::string inventory() const;
  std::uint64_t peak_rx_occupancy() const;
  std::uint32_t queue_depth() const { return depth_; }
  PacketPool& pool() { return pool_; }

 private:
  int n_;
  int m_;
  std::uint32_t depth_;
  PacketPool& pool_;
  std::vector<std::unique_ptr<Channel>> up_;
  std::vector<std::unique_ptr<Channel>> down_;
  std::vector<std::unique_ptr<PortQueues>> ports_;
  std::vector<std::unique_ptr<TxSource>> endpoint_tx_;
  std::vector<EndpointPort*> endpoints_;
  std::vector<SwitchAgent*> agents_;
  std::vector<int> xbar_rr_;
  TraceSink trace_{nullptr};
};

}  // namespace scinsim
