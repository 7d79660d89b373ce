// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "scinsim/config.hpp"

namespace scinsim {

enum class PacketKind : std::uint8_t { ReadReq, ReadResp, WriteReq, WriteResp, AtomicInc, FlagWrite, ScaleData };

/// Independent buffer classes at every receiver. Read data travels with the
/// other responses.
enum class QueueClass : std::uint8_t { Request = 0, WriteData = 1, Response = 2 };
inline constexpr int kNumClasses = 3;

QueueClass queue_class(PacketKind kind);
bool is_single_flit(PacketKind kind);
bool carries_payload(PacketKind kind);
const char* to_string(PacketKind kind);
const char* to_string(QueueClass cls);

struct NodeId {
  enum class Role : std::uint8_t { Accelerator, Switch };
  Role role = Role::Accelerator;
  std::uint16_t index = 0;

  static NodeId acc(int i) { return {Role::Accelerator, static_cast<std::uint16_t>(i)}; }
  static NodeId sw(int i) { return {Role::Switch, static_cast<std::uint16_t>(i)}; }
  bool is_switch() const { return role == Role::Switch; }
  std::string str() const;
  friend bool operator==(NodeId, NodeId) = default;
};

inline constexpr std::uint64_t kAddressMask = (std::uint64_t{1} << 48) - 1;

struct PacketHeader {
  PacketKind kind = PacketKind::ReadReq;
  bool inc_flag = false;
  bool multimem = false;  // accelerator-initiated in-switch operation
  NodeId src;
  NodeId dst;
  std::uint64_t address = 0;  // 48 bits
  std::uint32_t length = 0;   // bytes of data described or carried
  std::uint64_t tag = 0;
  std::uint32_t instruction_id = 0;
};

using PacketId = std::uint32_t;
inline constexpr PacketId kNoPacket = 0xffffffffu;

struct Packet {
  PacketHeader h;
  std::uint16_t plane = 0;     // switch carrying the packet
  std::uint32_t flits = 0;
  std::uint8_t hops = 0;       // links traversed by this packet
  std::uint8_t path_hops = 0;  // links traversed by the data it carries
  std::uint64_t seq = 0;
  std::vector<std::uint8_t> payload;
};

/// Recycling packet store. Ids stay valid until release().
class PacketPool {
 public:
  explicit PacketPool(std::uint64_t flit_size) : flit_size_(flit_size) {}

  PacketId make(const PacketHeader& h, int plane);
  Packet& operator[](PacketId id) { return packets_[id]; }
  const Packet& operator[](PacketId id) const { return packets_[id]; }
  void release(PacketId id);

  std::size_t live() const { return packets_.size() - free_.size(); }
  std::uint64_t created() const { return next_seq_; }

  std::uint32_t flits_for(PacketKind kind, std::uint32_t length) const;

 private:
  std::uint64_t flit_size_;
  std::deque<Packet> packets_;  // stable references across make()
  std::vector<PacketId> free_;
  std::uint64_t next_seq_ = 0;
};

}  // namespace scinsim
