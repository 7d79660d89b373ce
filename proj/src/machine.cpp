// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "scinsim/machine.hpp"

#include <algorithm>
#include <sstream>

#include "scinsim/rng.hpp"

namespace scinsim {

Machine::Machine(const SimConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), pool_(cfg.flit_size), fabric_(cfg_, pool_) {
  cfg_.validate();
  SplitMix64 root(seed);
  for (int a = 0; a < cfg_.num_accelerators; ++a) {
    endpoints_.push_back(std::make_unique<Endpoint>(a, cfg_, fabric_, root.fork(static_cast<std::uint64_t>(a))));
  }
  for (int s = 0; s < cfg_.num_switches; ++s) isas_.push_back(std::make_unique<Isa>(s, cfg_, fabric_));
}

void Machine::enable_nvls(std::uint64_t participants) {
  nvls_.clear();
  for (int s = 0; s < cfg_.num_switches; ++s) {
    nvls_.push_back(std::make_unique<NvlsUnit>(s, cfg_, fabric_, participants));
  }
}

void Machine::step() {
  const Cycle c = now_;
  fabric_.deliver(c);
  fabric_.crossbar(c);
  for (auto& isa : isas_) isa->tick(c);
  for (auto& unit : nvls_) unit->tick(c);
  for (auto& ep : endpoints_) ep->tick(c);
  if (driver_) driver_->tick(c);
  fabric_.transmit(c);
  if (observer_) observer_(*this, c);
  now_ = c + 1;
}

Cycle Machine::next_wake() const {
  const Cycle now = now_;
  Cycle next = fabric_.next_event();
  for (const auto& isa : isas_) next = std::min(next, isa->next_wake(now));
  for (const auto& unit : nvls_) next = std::min(next, unit->next_wake(now));
  for (const auto& ep : endpoints_) next = std::min(next, ep->next_wake(now));
  if (driver_) next = std::min(next, driver_->next_wake(now));
  return next;
}

void Machine::run() {
  if (!driver_) throw SimulationError("no driver attached");
  std::uint64_t last_signature = ~std::uint64_t{0};
  Cycle last_progress = now_;
  std::uint64_t steps = 0;
  while (!(driver_->finished() && fabric_.quiescent())) {
    step();
    if (skipping_ && fabric_.quiescent()) {
      const Cycle next = next_wake();
      if (next == kNever) {
        if (driver_->finished()) break;
        throw SimulationError("simulation stalled at cycle " + std::to_string(now_) +
                              " with nothing left to wake it\n" + inventory());
      }
      if (next > now_) now_ = next;
    }
    if (++steps % 1024 == 0) {
      const std::uint64_t sig = fabric_.stats().flits_injected + pool_.created();
      if (sig != last_signature) {
        last_signature = sig;
        last_progress = now_;
      } else if (now_ - last_progress > cfg_.deadlock_timeout_cycles) {
        throw SimulationError("no progress for " + std::to_string(now_ - last_progress) + " cycles (cycle " +
                              std::to_string(now_) + ")\n" + inventory());
      }
    }
  }
}

std::string Machine::inventory() const {
  std::ostringstream o;
  o << "in-flight inventory (" << pool_.live() << " live packets):\n" << fabric_.inventory();
  for (const auto& isa : isas_) o << isa->describe();
  if (driver_) o << driver_->describe();
  return o.str();
}

}  // namespace scinsim
