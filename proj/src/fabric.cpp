// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "scinsim/fabric.hpp"

#include <algorithm>
#include <sstream>

namespace scinsim {

void TraceSink::header() {
  if (out_) *out_ << "cycle,port,queue,event,kind,src,dst,tag,seq\n";
}

void TraceSink::event(Cycle c, const std::string& port, const char* queue, const char* ev, const Packet& p) {
  if (!out_) return;
  *out_ << c << ',' << port << ',' << queue << ',' << ev << ',' << to_string(p.h.kind) << ','
        << p.h.src.str() << ',' << p.h.dst.str() << ',' << p.h.tag << ',' << p.seq << '\n';
}

void TxSource::push(PacketId id, std::uint32_t flits, QueueClass cls, int downstream_qid) {
  const int k = static_cast<int>(cls);
  q_[k].push_back(TxEntry{id, flits, static_cast<std::uint8_t>(downstream_qid)});
  occupancy_[k] += flits;
  peak_ = std::max(peak_, occupancy_[k]);
}

Channel::Channel(std::string name, Cycle latency, FlitRate rate, int num_queues, std::uint32_t depth)
    : name_(std::move(name)), latency_(latency), rate_(rate), depth_(depth), credits_(num_queues, depth) {}

PacketId Channel::pop_arrival() {
  const Flight f = flights_.front();
  flights_.pop_front();
  flits_delivered_ += f.flits;
  in_flight_ -= f.flits;
  return f.id;
}

void Channel::return_credit(Cycle now, int qid, std::uint32_t flits) {
  credit_returns_.push_back(CreditReturn{now + latency_, static_cast<std::uint8_t>(qid), flits});
}

void Channel::absorb_credits(Cycle c) {
  while (!credit_returns_.empty() && credit_returns_.front().arrive <= c) {
    const auto& cr = credit_returns_.front();
    credits_[cr.qid] += cr.flits;
    if (credits_[cr.qid] > depth_) throw ProtocolViolation(name_ + ": credit counter above queue depth");
    credit_returns_.pop_front();
  }
}

bool Channel::can_send(TxSource& s) const {
  if (s.active_) return true;
  for (int k = 0; k < kNumClasses; ++k) {
    const auto& q = s.q_[(s.next_class_ + k) % kNumClasses];
    if (!q.empty() && credits_[q.front().qid] >= q.front().flits) return true;
  }
  return false;
}

bool Channel::start_packet(TxSource& s) {
  for (int k = 0; k < kNumClasses; ++k) {
    const int cls = (s.next_class_ + k) % kNumClasses;
    auto& q = s.q_[cls];
    if (q.empty() || credits_[q.front().qid] < q.front().flits) continue;
    s.cur_ = q.front();
    q.pop_front();
    credits_[s.cur_.qid] -= s.cur_.flits;
    s.cur_class_ = cls;
    s.remaining_ = s.cur_.flits;
    s.active_ = true;
    s.next_class_ = (cls + 1) % kNumClasses;
    return true;
  }
  return false;
}

bool Channel::sources_idle() const {
  return std::all_of(sources_.begin(), sources_.end(), [](const TxSource* s) { return s->idle(); });
}

Cycle Channel::next_event() const {
  Cycle next = kNever;
  if (!flights_.empty()) next = flights_.front().arrive;
  if (!credit_returns_.empty()) next = std::min(next, credit_returns_.front().arrive);
  return next;
}

void Channel::transmit(Cycle c, PacketPool& pool, TraceSink& trace) {
  std::uint32_t slots = rate_.slots(c);
  const std::size_t n = sources_.size();
  while (slots > 0) {
    std::size_t idx = n;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = (rr_ + k) % n;
      if (can_send(*sources_[i])) {
        idx = i;
        break;
      }
    }
    if (idx == n) break;
    bool contended = false;
    for (std::size_t k = 1; k < n && !contended; ++k) contended = can_send(*sources_[(idx + k) % n]);

    TxSource& s = *sources_[idx];
    if (!s.active_) start_packet(s);
    const std::uint32_t burst = contended ? 1 : std::min(slots, s.remaining_);
    s.remaining_ -= burst;
    s.flits_sent_ += burst;
    slots -= burst;
    flits_sent_ += burst;
    in_flight_ += burst;
    if (s.remaining_ == 0) {
      s.active_ = false;
      s.occupancy_[s.cur_class_] -= s.cur_.flits;
      flights_.push_back(Flight{c + latency_, s.cur_.id, s.cur_.flits});
      ++packets_sent_;
      if (trace.enabled()) trace.event(c, name_, s.name().c_str(), "tx", pool[s.cur_.id]);
    }
    rr_ = (idx + 1) % n;
  }
}

// ---------------------------------------------------------------------------

Fabric::Fabric(const SimConfig& cfg, PacketPool& pool)
    : n_(cfg.num_accelerators),
      m_(cfg.num_switches),
      depth_(cfg.resolved_vc_depth()),
      pool_(pool),
      endpoints_(cfg.num_accelerators, nullptr),
      agents_(cfg.num_switches, nullptr),
      xbar_rr_(cfg.num_switches, 0) {
  const Cycle lat = cfg.link_latency_cycles();
  const FlitRate rate = cfg.flit_rate();
  for (int a = 0; a < n_; ++a) {
    for (int s = 0; s < m_; ++s) {
      const std::string name = "a" + std::to_string(a) + ">s" + std::to_string(s);
      up_.push_back(std::make_unique<Channel>(name, lat, rate, 2 * kNumClasses, depth_));
      endpoint_tx_.push_back(std::make_unique<TxSource>(name + ".endpoint_tx"));
      up_.back()->add_source(endpoint_tx_.back().get());
    }
  }
  for (int s = 0; s < m_; ++s) {
    for (int a = 0; a < n_; ++a) {
      const std::string name = "s" + std::to_string(s) + ">a" + std::to_string(a);
      down_.push_back(std::make_unique<Channel>(name, lat, rate, kNumClasses, depth_));
      ports_.push_back(std::make_unique<PortQueues>(name, depth_));
      PortQueues& pq = *ports_.back();
      if (cfg.enable_isa) down_.back()->add_source(&pq.isa_tx);
      down_.back()->add_source(&pq.switch_tx);
      down_.back()->add_source(&pq.nvls_tx);
    }
  }
}

void Fabric::set_trace(std::ostream* out) {
  trace_ = TraceSink(out);
  trace_.header();
}

void Fabric::deliver(Cycle c) {
  for (int a = 0; a < n_; ++a) {
    for (int s = 0; s < m_; ++s) {
      Channel& ch = up(a, s);
      ch.absorb_credits(c);
      while (ch.arrival_due(c)) {
        const PacketId id = ch.pop_arrival();
        Packet& p = pool_[id];
        ++p.hops;
        ++p.path_hops;
        const int cls = static_cast<int>(queue_class(p.h.kind));
        RxQueue& rq = p.h.inc_flag ? port(s, a).isa_rx[cls] : port(s, a).switch_rx[cls];
        if (rq.flits + p.flits > depth_) throw ProtocolViolation(ch.name() + ": receive queue overflow");
        rq.q.push_back(id);
        rq.flits += p.flits;
        rq.peak = std::max(rq.peak, rq.flits);
        if (trace_.enabled()) trace_.event(c, ch.name(), p.h.inc_flag ? "isa_rx" : "switch_rx", "rx", p);
      }
    }
  }
  for (int s = 0; s < m_; ++s) {
    for (int a = 0; a < n_; ++a) {
      Channel& ch = down(s, a);
      ch.absorb_credits(c);
      while (ch.arrival_due(c)) {
        const PacketId id = ch.pop_arrival();
        Packet& p = pool_[id];
        ++p.hops;
        ++p.path_hops;
        ch.return_credit(c, static_cast<int>(queue_class(p.h.kind)), p.flits);
        if (trace_.enabled()) trace_.event(c, ch.name(), "endpoint_rx", "rx", p);
        if (!endpoints_[a]) throw SimulationError("no endpoint attached to accelerator " + std::to_string(a));
        endpoints_[a]->on_packet(s, id, c);
      }
    }
  }
}

void Fabric::crossbar(Cycle c) {
  for (int s = 0; s < m_; ++s) {
    const int start = xbar_rr_[s];
    for (int k = 0; k < n_; ++k) {
      const int a = (start + k) % n_;
      for (int cls = 0; cls < kNumClasses; ++cls) {
        RxQueue& rq = port(s, a).switch_rx[cls];
        while (!rq.q.empty()) {
          const PacketId id = rq.q.front();
          Packet& p = pool_[id];
          const std::uint32_t flits = p.flits;
          bool moved = false;
          if (p.h.dst.is_switch() || p.h.multimem) {
            if (!agents_[s]) throw SimulationError("switch " + std::to_string(s) + " has no multimem unit");
            moved = agents_[s]->accept(a, id, c);
          } else {
            const int d = p.h.dst.index;
            if (d >= n_) throw SimulationError("packet addressed to unknown accelerator " + p.h.dst.str());
            TxSource& tx = port(s, d).switch_tx;
            if (tx.has_space(static_cast<QueueClass>(cls), flits)) {
              tx.push(id, flits, static_cast<QueueClass>(cls), cls);
              if (trace_.enabled()) trace_.event(c, tx.name(), to_string(static_cast<QueueClass>(cls)), "xbar", p);
              moved = true;
            }
          }
          if (!moved) break;
          rq.q.pop_front();
          rq.flits -= flits;
          up(a, s).return_credit(c, cls, flits);
        }
      }
    }
    xbar_rr_[s] = (start + 1) % n_;
  }
}

void Fabric::transmit(Cycle c) {
  for (auto& ch : up_) ch->transmit(c, pool_, trace_);
  for (auto& ch : down_) ch->transmit(c, pool_, trace_);
}

PacketId Fabric::pop_isa_rx(int s, int a, QueueClass cls, Cycle c) {
  RxQueue& rq = port(s, a).isa_rx[static_cast<int>(cls)];
  const PacketId id = rq.q.front();
  rq.q.pop_front();
  const std::uint32_t flits = pool_[id].flits;
  rq.flits -= flits;
  up(a, s).return_credit(c, kNumClasses + static_cast<int>(cls), flits);
  return id;
}

FabricStats Fabric::stats() const {
  FabricStats st;
  for (const auto& ch : up_) {
    st.flits_injected += ch->flits_sent();
    st.flits_delivered += ch->flits_delivered();
    st.flits_in_flight += ch->flits_in_flight();
  }
  for (const auto& ch : down_) {
    st.flits_injected += ch->flits_sent();
    st.flits_delivered += ch->flits_delivered();
    st.flits_in_flight += ch->flits_in_flight();
  }
  return st;
}

bool Fabric::quiescent() const {
  for (const auto& ch : up_) {
    if (!ch->idle()) return false;
  }
  for (const auto& ch : down_) {
    if (!ch->idle()) return false;
  }
  for (const auto& pq : ports_) {
    for (int k = 0; k < kNumClasses; ++k) {
      if (!pq->switch_rx[k].q.empty() || !pq->isa_rx[k].q.empty()) return false;
    }
  }
  return true;
}

Cycle Fabric::next_event() const {
  Cycle next = kNever;
  for (const auto& ch : up_) next = std::min(next, ch->next_event());
  for (const auto& ch : down_) next = std::min(next, ch->next_event());
  return next;
}

std::uint64_t Fabric::peak_rx_occupancy() const {
  std::uint64_t peak = 0;
  for (const auto& pq : ports_) {
    for (int k = 0; k < kNumClasses; ++k) peak = std::max({peak, pq->switch_rx[k].peak, pq->isa_rx[k].peak});
  }
  return peak;
}

std::string Fabric::inventory() const {
  std::ostringstream o;
  auto channel_line = [&](const Channel& ch) {
    if (ch.idle()) return;
    o << "  " << ch.name() << ": " << ch.packets_in_flight() << " packets in flight, credits";
    for (int q = 0; q < (ch.name()[0] == 'a' ? 2 * kNumClasses : kNumClasses); ++q) o << ' ' << ch.credits(q);
    o << '\n';
  };
  for (const auto& ch : up_) channel_line(*ch);
  for (const auto& ch : down_) channel_line(*ch);
  for (int s = 0; s < m_; ++s) {
    for (int a = 0; a < n_; ++a) {
      const PortQueues& pq = port(s, a);
      for (int k = 0; k < kNumClasses; ++k) {
        const char* cls = to_string(static_cast<QueueClass>(k));
        if (!pq.switch_rx[k].q.empty())
          o << "  s" << s << " port " << a << " switch_rx." << cls << ": " << pq.switch_rx[k].q.size() << '\n';
        if (!pq.isa_rx[k].q.empty())
          o << "  s" << s << " port " << a << " isa_rx." << cls << ": " << pq.isa_rx[k].q.size() << '\n';
      }
      for (const TxSource* tx : {&pq.switch_tx, &pq.isa_tx, &pq.nvls_tx}) {
        if (!tx->idle()) o << "  " << tx->name() << ": " << tx->queued_packets() << " queued\n";
      }
    }
  }
  for (const auto& tx : endpoint_tx_) {
    if (!tx->idle()) o << "  " << tx->name() << ": " << tx->queued_packets() << " queued\n";
  }
  return o.str();
}

}  // namespace scinsim
