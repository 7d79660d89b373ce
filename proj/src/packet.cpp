// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "scinsim/packet.hpp"

namespace scinsim {

QueueClass queue_class(PacketKind kind) {
  switch (kind) {
    case PacketKind::ReadReq:
    case PacketKind::AtomicInc: return QueueClass::Request;
    case PacketKind::WriteReq:
    case PacketKind::ScaleData:
    case PacketKind::FlagWrite: return QueueClass::WriteData;
    case PacketKind::ReadResp:
    case PacketKind::WriteResp: return QueueClass::Response;
  }
  return QueueClass::Request;
}

bool is_single_flit(PacketKind kind) {
  return kind == PacketKind::ReadReq || kind == PacketKind::WriteResp ||
         kind == PacketKind::AtomicInc || kind == PacketKind::FlagWrite;
}

bool carries_payload(PacketKind kind) {
  return kind == PacketKind::ReadResp || kind == PacketKind::WriteReq || kind == PacketKind::ScaleData;
}

const char* to_string(PacketKind kind) {
  switch (kind) {
    case PacketKind::ReadReq: return "ReadReq";
    case PacketKind::ReadResp: return "ReadResp";
    case PacketKind::WriteReq: return "WriteReq";
    case PacketKind::WriteResp: return "WriteResp";
    case PacketKind::AtomicInc: return "AtomicInc";
    case PacketKind::FlagWrite: return "FlagWrite";
    case PacketKind::ScaleData: return "ScaleData";
  }
  return "?";
}

const char* to_string(QueueClass cls) {
  switch (cls) {
    case QueueClass::Request: return "request";
    case QueueClass::WriteData: return "write-data";
    case QueueClass::Response: return "response";
  }
  return "?";
}

std::string NodeId::str() const {
  return (role == Role::Switch ? "s" : "a") + std::to_string(index);
}

std::uint32_t PacketPool::flits_for(PacketKind kind, std::uint32_t length) const {
  if (is_single_flit(kind)) return 1;
  return static_cast<std::uint32_t>(1 + ceil_div(length, flit_size_));
}

PacketId PacketPool::make(const PacketHeader& h, int plane) {
  PacketId id;
  if (!free_.empty()) {
    id = free_.back();
    free_.pop_back();
  } else {
    id = static_cast<PacketId>(packets_.size());
    packets_.emplace_back();
  }
  Packet& p = packets_[id];
  p.h = h;
  p.h.address &= kAddressMask;
  p.plane = static_cast<std::uint16_t>(plane);
  p.flits = flits_for(h.kind, h.length);
  p.hops = 0;
  p.path_hops = 0;
  p.seq = next_seq_++;
  p.payload.clear();
  return id;
}

void PacketPool::release(PacketId id) { free_.push_back(id); }

}  // namespace scinsim
