// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "scinsim/isa.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <set>
#include <sstream>

#include "scinsim/endpoint.hpp"
#include "scinsim/half.hpp"
#include "scinsim/quant.hpp"
#include "scinsim/reduction.hpp"

namespace scinsim {

void validate_program(const std::vector<IsaInstruction>& program, const SimConfig& cfg) {
  const int n = cfg.num_accelerators;
  const std::uint64_t all = n >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1;
  std::set<std::uint32_t> ids;
  for (std::size_t i = 0; i < program.size(); ++i) {
    const IsaInstruction& ins = program[i];
    const std::string where = "instruction " + std::to_string(ins.id);
    auto fail = [&](const std::string& what) { throw ConfigError(where, static_cast<int>(i) + 1, what); };
    if (ins.addresses.size() != static_cast<std::size_t>(n)) fail("needs one address per accelerator");
    for (std::uint64_t a : ins.addresses) {
      if (a + ins.length > kAddressMask + 1) fail("address range exceeds 48 bits");
    }
    if (ins.is_scale_load) {
      if (i == 0 || !program[i - 1].quant_enable || program[i - 1].id != ins.id) {
        fail("scale-address instruction without a preceding quantized instruction of the same id");
      }
      continue;
    }
    if (!ids.insert(ins.id).second) fail("duplicate instruction id");
    if (ins.source_mask == 0) fail("source mask is empty");
    if (ins.destination_mask == 0) fail("destination mask is empty");
    if ((ins.participants() & ~all) != 0) fail("mask selects a nonexistent accelerator");
    if (ins.quant_enable) {
      if (i + 1 >= program.size() || !program[i + 1].is_scale_load || program[i + 1].id != ins.id) {
        fail("quantized instruction must be followed by its scale-address instruction");
      }
      if (ins.length % cfg.quant_block != 0) fail("quantized length must be a multiple of the quantization block");
    } else {
      if (ins.dtype != cfg.dtype) fail(std::string("element type ") + to_string(ins.dtype) +
                                       " does not match the reduction unit's " + to_string(cfg.dtype));
      if (ins.length % element_size(ins.dtype) != 0) fail("length is not a whole number of elements");
    }
  }
}

std::vector<std::uint64_t> waves_for_switch(std::uint64_t length, std::uint64_t wave_size, int sw, int switches) {
  std::vector<std::uint64_t> out;
  const std::uint64_t waves = ceil_div(length, wave_size);
  for (std::uint64_t w = static_cast<std::uint64_t>(sw); w < waves; w += static_cast<std::uint64_t>(switches)) {
    out.push_back(w);
  }
  return out;
}

std::vector<int> participating_switches(std::uint64_t length, std::uint64_t wave_size, int switches) {
  std::vector<int> out;
  const std::uint64_t waves = ceil_div(length, wave_size);
  for (int s = 0; s < switches && static_cast<std::uint64_t>(s) < waves; ++s) out.push_back(s);
  return out;
}

Isa::Isa(int sw, const SimConfig& cfg, Fabric& fabric)
    : sw_(sw), cfg_(cfg), fabric_(fabric), n_(cfg.num_accelerators) {
  packets_per_wave_ = static_cast<std::uint32_t>(cfg.wave_size / cfg.max_payload);
  tables_.assign(n_, std::vector<WaveEntry>(cfg.waves_per_table));
  ready_sources_.assign(cfg.waves_per_table, 0);
  entry_path_hops_.assign(cfg.waves_per_table, 0);
  for (std::uint32_t e = 0; e < cfg.waves_per_table; ++e) free_entries_.insert(e);
}

void Isa::load(std::vector<IsaInstruction> program) {
  validate_program(program, cfg_);
  program_ = std::move(program);
  current_ = 0;
  timings_.clear();
  barrier_targets_.clear();
  for (const auto& ins : program_) {
    if (ins.is_scale_load) continue;
    InstructionTiming t;
    t.id = ins.id;
    t.participated = !waves_for_switch(ins.length, cfg_.wave_size, sw_, cfg_.num_switches).empty();
    timings_.push_back(t);
    if (t.participated) barrier_targets_[ins.id] = std::popcount(ins.participants());
  }
  advance_program();
}

std::uint64_t Isa::wave_bytes(std::uint64_t wave) const {
  return std::min<std::uint64_t>(cfg_.wave_size, ins_->length - wave * cfg_.wave_size);
}

std::uint32_t Isa::packets_in(std::uint64_t bytes) const {
  return static_cast<std::uint32_t>(ceil_div(bytes, cfg_.max_payload));
}

std::uint64_t Isa::scale_bytes_of(std::uint64_t wave) const { return cfg_.scale_bytes_for(wave_bytes(wave)); }

void Isa::advance_program() {
  while (current_ < program_.size()) {
    const IsaInstruction& ins = program_[current_];
    if (!ins.is_scale_load && barrier_targets_.count(ins.id)) break;
    ++current_;
  }
}

void Isa::send(int port, PacketHeader h, QueueClass cls, const std::uint8_t* payload, std::uint8_t path_hops) {
  h.src = NodeId::sw(sw_);
  h.inc_flag = true;
  PacketPool& pool = fabric_.pool();
  const PacketId id = pool.make(h, sw_);
  Packet& p = pool[id];
  p.path_hops = path_hops;
  if (payload && h.length > 0) p.payload.assign(payload, payload + h.length);
  fabric_.port(sw_, port).isa_tx.push(id, p.flits, cls, static_cast<int>(cls));
}

void Isa::tick(Cycle c) {
  for (int a = 0; a < n_; ++a) {
    PortQueues& pq = fabric_.port(sw_, a);
    for (int k = 0; k < kNumClasses; ++k) {
      while (!pq.isa_rx[k].q.empty()) handle(a, fabric_.pop_isa_rx(sw_, a, static_cast<QueueClass>(k), c), c);
    }
  }
  while (!out_.empty() && out_.front().ready <= c) {
    emit(out_.front());
    out_.pop_front();
    ++waves_emitted_;
  }
  finish_if_complete(c);
  try_start(c);
  if (running_) issue(c);
}

void Isa::handle(int port, PacketId id, Cycle c) {
  PacketPool& pool = fabric_.pool();
  const Packet& p = pool[id];
  switch (p.h.kind) {
    case PacketKind::AtomicInc: {
      auto target = barrier_targets_.find(p.h.instruction_id);
      if (target == barrier_targets_.end()) {
        throw ProtocolViolation("switch " + std::to_string(sw_) + ": AtomicInc for unknown collective " +
                                std::to_string(p.h.instruction_id));
      }
      stats_.max_atomic_hops = std::max<int>(stats_.max_atomic_hops, p.path_hops);
      if (++barrier_counts_[p.h.instruction_id] > target->second) {
        throw ProtocolViolation("switch " + std::to_string(sw_) + ": barrier counter of collective " +
                                std::to_string(p.h.instruction_id) + " exceeded its target");
      }
      break;
    }
    case PacketKind::ReadResp:
      on_read_response(port, p, c);
      break;
    case PacketKind::WriteResp:
      if (!running_ || outstanding_acks_ == 0) throw ProtocolViolation("unexpected write response at the ISA");
      --outstanding_acks_;
      timings_[current_timing_index()].last_write_resp = c;
      break;
    default:
      throw ProtocolViolation(std::string("ISA cannot consume ") + to_string(p.h.kind));
  }
  pool.release(id);
}

std::size_t Isa::current_timing_index() const {
  for (std::size_t i = 0; i < timings_.size(); ++i) {
    if (timings_[i].id == ins_->id) return i;
  }
  return 0;
}

void Isa::on_read_response(int port, const Packet& p, Cycle c) {
  if (!running_) throw ProtocolViolation("read response with no running instruction");
  const std::uint64_t stride = packets_per_wave_ + 1;
  const std::uint64_t e = p.h.tag / stride;
  const std::uint64_t off = p.h.tag % stride;
  if (e >= cfg_.waves_per_table) throw ProtocolViolation("read response tag names a nonexistent entry");
  WaveEntry& en = tables_[port][e];
  if (en.state != EntryState::Waiting || p.h.instruction_id != ins_->id) {
    throw ProtocolViolation("switch " + std::to_string(sw_) + ": read response for an entry that is not waiting (tag " +
                            std::to_string(p.h.tag) + ")");
  }
  const std::uint64_t bytes = wave_bytes(en.wave);
  if (off == packets_per_wave_) {
    if (!ins_->quant_enable) throw ProtocolViolation("scale response for an unquantized instruction");
    if (p.payload.size() != scale_bytes_of(en.wave)) throw ProtocolViolation("scale response has the wrong size");
    std::memcpy(en.scales.data(), p.payload.data(), p.payload.size());
  } else {
    const std::uint64_t at = off * cfg_.max_payload;
    if (at >= bytes || p.payload.size() != std::min<std::uint64_t>(cfg_.max_payload, bytes - at)) {
      throw ProtocolViolation("read response does not fit its wave slot");
    }
    std::memcpy(en.data.data() + at, p.payload.data(), p.payload.size());
  }
  std::uint64_t& word = en.fill[off / 64];
  const std::uint64_t bit = std::uint64_t{1} << (off % 64);
  if (word & bit) throw ProtocolViolation("duplicate read response for tag " + std::to_string(p.h.tag));
  word |= bit;
  entry_path_hops_[e] = std::max(entry_path_hops_[e], p.path_hops);
  if (++en.filled == en.expected) {
    en.state = EntryState::Ready;
    if (++ready_sources_[e] == sources_.size()) enter_pipeline(static_cast<std::uint32_t>(e), c);
  }
}

void Isa::try_start(Cycle c) {
  if (running_ || current_ >= program_.size()) return;
  const IsaInstruction& ins = program_[current_];
  if (barrier_counts_[ins.id] < barrier_targets_.at(ins.id)) return;
  ins_ = &ins;
  scale_ins_ = ins.quant_enable ? &program_[current_ + 1] : nullptr;
  sources_.clear();
  destinations_.clear();
  for (int a = 0; a < n_; ++a) {
    if (ins.source_mask >> a & 1) sources_.push_back(a);
    if (ins.destination_mask >> a & 1) destinations_.push_back(a);
  }
  waves_ = waves_for_switch(ins.length, cfg_.wave_size, sw_, cfg_.num_switches);
  next_wave_ = 0;
  waves_emitted_ = 0;
  outstanding_acks_ = 0;
  running_ = true;
  timings_[current_timing_index()].barrier_done = c;
}

void Isa::issue(Cycle /*c*/) {
  const std::uint64_t stride = packets_per_wave_ + 1;
  const std::size_t fill_words = (packets_per_wave_ + 1 + 63) / 64;
  while (next_wave_ < waves_.size() && !free_entries_.empty()) {
    const std::uint32_t e = *free_entries_.begin();
    free_entries_.erase(free_entries_.begin());
    ++entries_in_use_;
    stats_.peak_entries = std::max<std::uint64_t>(stats_.peak_entries, entries_in_use_);
    stats_.peak_buffered_bytes = std::max<std::uint64_t>(stats_.peak_buffered_bytes, entries_in_use_ * cfg_.wave_size);
    const std::uint64_t w = waves_[next_wave_++];
    const std::uint64_t bytes = wave_bytes(w);
    const std::uint32_t npk = packets_in(bytes);
    ready_sources_[e] = 0;
    entry_path_hops_[e] = 0;
    for (int a : sources_) {
      WaveEntry& en = tables_[a][e];
      en.state = EntryState::Waiting;
      en.wave = w;
      en.base_address = ins_->addresses[a] + w * cfg_.wave_size;
      en.expected = npk + (ins_->quant_enable ? 1 : 0);
      en.filled = 0;
      en.fill.assign(fill_words, 0);
      if (en.data.size() < cfg_.wave_size) en.data.resize(cfg_.wave_size);
      PacketHeader h;
      h.kind = PacketKind::ReadReq;
      h.dst = NodeId::acc(a);
      h.instruction_id = ins_->id;
      if (ins_->quant_enable) {
        en.scales.resize(cfg_.scale_bytes_for(cfg_.wave_size));
        h.address = scale_ins_->addresses[a] + w * cfg_.wave_size / cfg_.quant_block * cfg_.scale_bytes;
        h.length = static_cast<std::uint32_t>(scale_bytes_of(w));
        h.tag = e * stride + packets_per_wave_;
        send(a, h, QueueClass::Request, nullptr, 0);
        ++stats_.read_requests;
      }
      for (std::uint32_t p = 0; p < npk; ++p) {
        const std::uint64_t at = p * cfg_.max_payload;
        h.address = en.base_address + at;
        h.length = static_cast<std::uint32_t>(std::min<std::uint64_t>(cfg_.max_payload, bytes - at));
        h.tag = e * stride + p;
        send(a, h, QueueClass::Request, nullptr, 0);
        ++stats_.read_requests;
      }
    }
  }
}

void Isa::enter_pipeline(std::uint32_t e, Cycle c) {
  const std::uint64_t w = tables_[sources_.front()][e].wave;
  const std::uint64_t bytes = wave_bytes(w);
  const std::size_t ns = sources_.size();
  lane_.resize(ns);
  PendingOutput out;
  out.wave = w;
  out.path_hops = entry_path_hops_[e];
  out.data.resize(bytes);

  if (!ins_->quant_enable) {
    if (ins_->dtype == ElementType::Fp16) {
      const std::size_t count = bytes / 2;
      for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t k = 0; k < ns; ++k) {
          std::uint16_t v;
          std::memcpy(&v, tables_[sources_[k]][e].data.data() + 2 * i, 2);
          lane_[k] = half_to_float(v);
        }
        const std::uint16_t r = float_to_half(tree_reduce(std::span<float>(lane_)));
        std::memcpy(out.data.data() + 2 * i, &r, 2);
      }
    } else {
      const std::size_t count = bytes / 4;
      for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t k = 0; k < ns; ++k) std::memcpy(&lane_[k], tables_[sources_[k]][e].data.data() + 4 * i, 4);
        const float r = tree_reduce(std::span<float>(lane_));
        std::memcpy(out.data.data() + 4 * i, &r, 4);
      }
    }
  } else {
    QuantBlockSpec spec;
    spec.block_size = cfg_.quant_block;
    spec.bits = 8;
    spec.scale_bytes = cfg_.scale_bytes;
    const std::size_t qb = cfg_.quant_block;
    const std::size_t blocks = bytes / qb;
    out.scales.resize(blocks * cfg_.scale_bytes);
    std::vector<float> scales(ns);
    std::vector<float> sum(qb);
    std::vector<std::int8_t> codes(qb);
    for (std::size_t b = 0; b < blocks; ++b) {
      for (std::size_t k = 0; k < ns; ++k) {
        const std::uint8_t* raw = tables_[sources_[k]][e].scales.data() + b * cfg_.scale_bytes;
        if (cfg_.scale_bytes == 2) {
          std::uint16_t bits;
          std::memcpy(&bits, raw, 2);
          scales[k] = half_to_float(bits);
        } else {
          std::memcpy(&scales[k], raw, 4);
        }
        if (!(scales[k] > 0.0f) || !std::isfinite(scales[k])) {
          throw SimulationError("instruction " + std::to_string(ins_->id) + ": non-positive scale factor from accelerator " +
                                std::to_string(sources_[k]));
        }
      }
      for (std::size_t i = 0; i < qb; ++i) {
        for (std::size_t k = 0; k < ns; ++k) {
          const auto code = static_cast<std::int8_t>(tables_[sources_[k]][e].data[b * qb + i]);
          lane_[k] = dequantize_value(code, scales[k]);
        }
        sum[i] = tree_reduce(std::span<float>(lane_));
      }
      const float scale = quantize_block(sum.data(), qb, spec, codes.data());
      std::memcpy(out.data.data() + b * qb, codes.data(), qb);
      if (cfg_.scale_bytes == 2) {
        const std::uint16_t bits = scale_to_bits16(scale);
        std::memcpy(out.scales.data() + b * 2, &bits, 2);
      } else {
        std::memcpy(out.scales.data() + b * 4, &scale, 4);
      }
    }
  }

  for (int a : sources_) {
    WaveEntry& en = tables_[a][e];
    en.state = EntryState::Idle;
    en.filled = 0;
  }
  free_entries_.insert(e);
  --entries_in_use_;
  ++stats_.waves_reduced;
  out.ready = c + (ins_->quant_enable ? cfg_.isa_compute_latency_inq : cfg_.isa_compute_latency_regular);
  out_.push_back(std::move(out));
}

void Isa::emit(const PendingOutput& out) {
  const std::uint64_t bytes = out.data.size();
  const std::uint32_t npk = packets_in(bytes);
  for (int d : destinations_) {
    PacketHeader h;
    h.kind = PacketKind::WriteReq;
    h.dst = NodeId::acc(d);
    h.instruction_id = ins_->id;
    for (std::uint32_t p = 0; p < npk; ++p) {
      const std::uint64_t at = p * cfg_.max_payload;
      h.address = ins_->addresses[d] + out.wave * cfg_.wave_size + at;
      h.length = static_cast<std::uint32_t>(std::min<std::uint64_t>(cfg_.max_payload, bytes - at));
      h.tag = next_tag_++;
      send(d, h, QueueClass::WriteData, out.data.data() + at, out.path_hops);
      ++outstanding_acks_;
      ++stats_.write_requests;
    }
    if (ins_->quant_enable) {
      h.kind = PacketKind::ScaleData;
      h.address = scale_ins_->addresses[d] + out.wave * cfg_.wave_size / cfg_.quant_block * cfg_.scale_bytes;
      h.length = static_cast<std::uint32_t>(out.scales.size());
      h.tag = next_tag_++;
      send(d, h, QueueClass::WriteData, out.scales.data(), out.path_hops);
      ++outstanding_acks_;
      ++stats_.scale_packets;
    }
  }
}

void Isa::finish_if_complete(Cycle c) {
  if (!running_ || next_wave_ < waves_.size() || waves_emitted_ < waves_.size() || outstanding_acks_ > 0) return;
  for (int d : destinations_) {
    PacketHeader h;
    h.kind = PacketKind::FlagWrite;
    h.dst = NodeId::acc(d);
    h.address = switch_flag_address(sw_);
    h.length = 8;
    h.instruction_id = ins_->id;
    send(d, h, QueueClass::WriteData, nullptr, 0);
    ++stats_.flag_writes;
  }
  timings_[current_timing_index()].flags_sent = c;
  running_ = false;
  ins_ = nullptr;
  ++current_;
  advance_program();
}

Cycle Isa::next_wake(Cycle now) const {
  for (int a = 0; a < n_; ++a) {
    const PortQueues& pq = fabric_.port(sw_, a);
    for (int k = 0; k < kNumClasses; ++k) {
      if (!pq.isa_rx[k].q.empty()) return now;
    }
  }
  Cycle next = kNever;
  if (!out_.empty()) next = std::max(now, out_.front().ready);
  if (running_) {
    if (next_wave_ < waves_.size() && !free_entries_.empty()) return now;
    if (next_wave_ == waves_.size() && waves_emitted_ == waves_.size() && outstanding_acks_ == 0) return now;
  } else if (current_ < program_.size()) {
    auto it = barrier_counts_.find(program_[current_].id);
    if (it != barrier_counts_.end() && it->second >= barrier_targets_.at(program_[current_].id)) return now;
  }
  return next;
}

bool Isa::idle(Cycle c) const { return next_wake(c) != c; }

std::string Isa::describe() const {
  std::ostringstream o;
  o << "  isa s" << sw_ << ": ";
  if (running_) {
    o << "running instruction " << ins_->id << ", waves issued " << next_wave_ << "/" << waves_.size()
      << ", emitted " << waves_emitted_ << ", write responses outstanding " << outstanding_acks_
      << ", entries in use " << entries_in_use_;
  } else if (current_ < program_.size()) {
    const auto id = program_[current_].id;
    auto it = barrier_counts_.find(id);
    o << "waiting at barrier of instruction " << id << " (" << (it == barrier_counts_.end() ? 0 : it->second) << "/"
      << barrier_targets_.at(id) << ")";
  } else {
    o << "program complete";
  }
  o << '\n';
  return o.str();
}

}  // namespace scinsim
