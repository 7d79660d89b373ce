// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "scinsim/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

namespace scinsim {

std::vector<RunReport> run_specs(const SimConfig& cfg, const std::vector<CollectiveSpec>& specs, unsigned workers,
                                 const std::vector<Inputs>* inputs) {
  std::vector<RunReport> out(specs.size());
  if (specs.empty()) return out;
  if (inputs && inputs->size() != specs.size()) {
    throw ConfigError("inputs", 0, "one input set per spec required");
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= specs.size()) return;
      try {
        RunOptions opts;
        if (inputs && !(*inputs)[i].empty()) opts.inputs = &(*inputs)[i];
        out[i] = run_collective(cfg, specs[i], opts);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        next = specs.size();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(specs.size())));
  if (n == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
  return out;
}

std::uint64_t wave_size_for(std::uint64_t buffer, std::uint32_t waves, std::uint64_t max_payload) {
  if (waves == 0 || max_payload == 0) throw ConfigError("waves", 0, "must be positive");
  const std::uint64_t w = buffer / waves / max_payload * max_payload;
  if (w == 0) throw ConfigError("waves", 0, "buffer too small for " + std::to_string(waves) + " waves");
  return w;
}

std::vector<WavePoint> sweep_waves(const SimConfig& cfg, std::uint64_t buffer, const std::vector<std::uint32_t>& waves,
                                   std::uint64_t message_size, unsigned workers) {
  std::vector<WavePoint> pts;
  std::vector<SimConfig> cfgs;
  for (std::uint32_t k : waves) {
    SimConfig c = cfg;
    c.waves_per_table = k;
    c.wave_size = wave_size_for(buffer, k, cfg.max_payload);
    c.table_capacity = buffer;
    c.validate();
    cfgs.push_back(c);
    pts.push_back({k, c.wave_size, 0, 0, false, true});
  }
  // One config per point, so fan out by hand rather than through run_specs.
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= pts.size()) return;
      try {
        CollectiveSpec s;
        s.algorithm = Algorithm::Scin;
        s.message_size = message_size;
        s.include_sync = false;
        s.seed = cfg.rng_seed;
        const RunReport r = run_collective(cfgs[i], s);
        pts[i].bandwidth = r.achieved_bandwidth;
        pts[i].correct = r.correct;
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!error) error = std::current_exception();
        next = pts.size();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(pts.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);

  double best = 0;
  for (const auto& p : pts) best = std::max(best, p.bandwidth);
  for (auto& p : pts) {
    p.fraction_of_best = best > 0 ? p.bandwidth / best : 0;
    p.saturated = p.fraction_of_best >= 0.95;
  }
  return pts;
}

std::vector<CalibrationPoint> calibrate(const SimConfig& cfg, const CalibrationReference& ref, unsigned workers) {
  std::vector<CollectiveSpec> specs(2);
  specs[0].message_size = 4096;
  specs[1].message_size = 16ULL << 20;
  for (auto& s : specs) {
    s.algorithm = Algorithm::Scin;
    s.include_sync = false;
    s.seed = cfg.rng_seed;
  }
  const auto reports = run_specs(cfg, specs, workers);
  auto rel = [](double sim, double r) { return std::abs(sim - r) / r; };

  std::vector<CalibrationPoint> pts;
  const double t4k = to_ns(reports[0].total_time);
  pts.push_back({"allreduce_4KB_latency", "ns", ref.latency_4k_ns, t4k, rel(t4k, ref.latency_4k_ns),
                 ref.latency_tolerance, false});
  const double t16m = to_ns(reports[1].total_time);
  pts.push_back({"allreduce_16MB_latency", "ns", ref.latency_16m_ns, t16m, rel(t16m, ref.latency_16m_ns),
                 ref.latency_tolerance, false});
  const double util = reports[1].achieved_bandwidth / static_cast<double>(cfg.reference_payload_bandwidth.value);
  pts.push_back({"allreduce_16MB_utilization", "fraction", ref.utilization_16m, util,
                 rel(util, ref.utilization_16m), ref.min_utilization, false});
  pts[0].pass = reports[0].correct && pts[0].relative_error <= pts[0].tolerance;
  pts[1].pass = reports[1].correct && pts[1].relative_error <= pts[1].tolerance;
  pts[2].pass = reports[1].correct && util >= ref.min_utilization;
  return pts;
}

std::string calibration_to_csv(const std::vector<CalibrationPoint>& points) {
  std::string s = "point,unit,reference,simulated,relative_error,tolerance,pass\n";
  char buf[256];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof buf, "%s,%s,%.6g,%.6g,%.6f,%.6g,%d\n", p.name.c_str(), p.unit.c_str(), p.reference,
                  p.simulated, p.relative_error, p.tolerance, p.pass ? 1 : 0);
    s += buf;
  }
  return s;
}

std::map<std::string, LatencyTable> simulate_latency_table(const SimConfig& cfg,
                                                           const std::vector<Algorithm>& algorithms,
                                                           const std::vector<std::uint64_t>& sizes,
                                                           std::uint64_t seed, unsigned workers) {
  std::vector<CollectiveSpec> specs;
  for (Algorithm a : algorithms) {
    for (std::uint64_t m : sizes) {
      CollectiveSpec s;
      s.algorithm = a;
      s.message_size = m;
      s.include_sync = true;
      s.seed = seed;
      specs.push_back(s);
    }
  }
  const auto reports = run_specs(cfg, specs, workers);
  std::map<std::string, LatencyTable> out;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (!reports[i].correct) {
      throw SimulationError(std::string(to_string(specs[i].algorithm)) + " at " +
                            std::to_string(specs[i].message_size) + " bytes failed verification");
    }
    out[to_string(specs[i].algorithm)].add(specs[i].message_size, to_ns(reports[i].total_time));
  }
  return out;
}

CommModels comm_models_from_tables(const std::map<std::string, LatencyTable>& tables) {
  auto get = [&](Algorithm a) -> const LatencyTable& {
    auto it = tables.find(to_string(a));
    if (it == tables.end() || it->second.empty()) {
      throw ConfigError("algorithm", 0, std::string("latency table lacks '") + to_string(a) + "'");
    }
    return it->second;
  };
  CommModels m;
  m.ring = {"ring", get(Algorithm::Ring), get(Algorithm::Ring)};
  m.scin = {"scin", get(Algorithm::Scin), get(Algorithm::Scin)};
  m.scin_inq = {"scin-inq", get(Algorithm::ScinInq), get(Algorithm::Scin)};
  return m;
}

}  // namespace scinsim
