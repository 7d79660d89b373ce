// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "scinsim/config.hpp"
#include "scinsim/endpoint.hpp"
#include "scinsim/fabric.hpp"
#include "scinsim/isa.hpp"
#include "scinsim/nvls.hpp"
#include "scinsim/packet.hpp"

namespace scinsim {

/// Software running on the accelerators for one experiment.
class Driver {
 public:
  virtual ~Driver() = default;
  virtual void tick(Cycle c) = 0;
  virtual bool finished() const = 0;
  /// Earliest cycle at which tick() has something to do, kNever if only
  /// incoming packets can wake the driver.
  virtual Cycle next_wake(Cycle now) const = 0;
  virtual std::string describe() const { return {}; }
};

/// A complete simulated system: fabric, endpoints, one ISA per switch and
/// optionally a multimem unit per switch, advanced one cycle at a time.
/// Each cycle runs: arrivals and credits, crossbar, switch units,
/// endpoints, driver, transmission. Stretches where nothing can change are
/// skipped.
class Machine {
 public:
  Machine(const SimConfig& cfg, std::uint64_t seed);

  const SimConfig& config() const { return cfg_; }
  Fabric& fabric() { return fabric_; }
  const Fabric& fabric() const { return fabric_; }
  PacketPool& pool() { return pool_; }
  Endpoint& endpoint(int a) { return *endpoints_[a]; }
  const Endpoint& endpoint(int a) const { return *endpoints_[a]; }
  Isa& isa(int s) { return *isas_[s]; }
  const Isa& isa(int s) const { return *isas_[s]; }
  void enable_nvls(std::uint64_t participants);
  NvlsUnit* nvls(int s) { return nvls_.empty() ? nullptr : nvls_[s].get(); }

  void set_driver(Driver* d) { driver_ = d; }
  void set_trace(std::ostream* out) { fabric_.set_trace(out); }
  /// Called after every simulated cycle when set (property checks).
  void set_observer(std::function<void(const Machine&, Cycle)> f) { observer_ = std::move(f); }
  void disable_skipping() { skipping_ = false; }

  Cycle now() const { return now_; }
  void step();
  /// Steps until the driver finishes and the fabric drains. Throws
  /// SimulationError with an inventory of stuck traffic on deadlock.
  void run();
  /// Steps until `pred()` holds or `limit` cycles pass.
  template <class Pred>
  void run_until(Pred pred, Cycle limit) {
    while (!pred() && now_ < limit) step();
  }

  std::string inventory() const;

 private:
  Cycle next_wake() const;

  SimConfig cfg_;
  PacketPool pool_;
  Fabric fabric_;
  std::vector<std::unique_ptr<Endpoint>> endpoints_;
  std::vector<std::unique_ptr<Isa>> isas_;
  std::vector<std::unique_ptr<NvlsUnit>> nvls_;
  Driver* driver_ = nullptr;
  std::function<void(const Machine&, Cycle)> observer_;
  bool skipping_ = true;
  Cycle now_ = 0;
};

}  // namespace scinsim
