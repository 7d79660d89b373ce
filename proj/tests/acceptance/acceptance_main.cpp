// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance checks. Prints one PASS/FAIL line per criterion and writes the
// evidence for each as CSV under --out.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "scinsim/collectives.hpp"
#include "scinsim/config.hpp"
#include "scinsim/core.hpp"
#include "scinsim/experiments.hpp"
#include "scinsim/half.hpp"
#include "scinsim/io.hpp"
#include "scinsim/llm_perf.hpp"
#include "scinsim/quant.hpp"
#include "scinsim/rng.hpp"

#ifndef SCINSIM_SOURCE_DIR
#define SCINSIM_SOURCE_DIR "."
#endif

namespace fs = std::filesystem;
using namespace scinsim;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  std::string report;  // CSV evidence, compared byte for byte on rerun
};

struct Context {
  fs::path data;
  unsigned workers = 1;
};

std::string fmt(const char* f, double a) {
  char b[64];
  std::snprintf(b, sizeof b, f, a);
  return b;
}

CollectiveSpec spec_of(Algorithm a, std::uint64_t bytes, bool sync = true, std::uint64_t seed = 1) {
  CollectiveSpec s;
  s.algorithm = a;
  s.message_size = bytes;
  s.include_sync = sync;
  s.seed = seed;
  return s;
}

// Runs a batch and insists every run verified.
std::vector<RunReport> run_checked(const SimConfig& cfg, const std::vector<CollectiveSpec>& specs, const Context& ctx) {
  auto reps = run_specs(cfg, specs, ctx.workers);
  for (const auto& r : reps) {
    if (!r.correct) throw SimulationError(r.algorithm + " " + std::to_string(r.message_size) + ": " + r.failure);
  }
  return reps;
}

// 1. Prototype calibration.
Outcome calibration(const Context& ctx) {
  const auto pts = calibrate(SimConfig::prototype(), CalibrationReference{}, ctx.workers);
  Outcome o;
  o.pass = std::all_of(pts.begin(), pts.end(), [](const auto& p) { return p.pass; });
  o.detail = "4KB " + fmt("%.0f ns", pts[0].simulated) + " (ref 2620), 16MB " + fmt("%.3f ms", pts[1].simulated / 1e6) +
             " (ref 2.27), utilization " + fmt("%.1f%%", 100 * pts[2].simulated);
  o.report = calibration_to_csv(pts);
  return o;
}

// 2. Ring bandwidth bound on the 8-accelerator system.
Outcome ring_bound(const Context& ctx) {
  const SimConfig cfg = SimConfig::dgx(8);
  const double bound = 8.0 / 14.0 * static_cast<double>(cfg.reference_payload_bandwidth.value);
  const std::vector<std::uint64_t> sizes{4096, 65536, 1 << 20, 4 << 20, 16 << 20, 64ULL << 20};
  std::vector<CollectiveSpec> specs;
  for (auto m : sizes) specs.push_back(spec_of(Algorithm::Ring, m));
  const auto reps = run_checked(cfg, specs, ctx);

  bool below = true;
  for (const auto& r : reps) below = below && r.achieved_bandwidth <= bound;
  // Slope between the two largest sizes cancels the fixed per-step cost.
  const auto& a = reps[reps.size() - 2];
  const auto& b = reps.back();
  const double slope = static_cast<double>(b.message_size - a.message_size) /
                       (static_cast<double>((b.total_time - a.total_time).count()) * 1e-12);
  const double rel = std::abs(slope - bound) / bound;

  Outcome o;
  o.pass = below && rel <= 0.05;
  o.detail = "asymptotic " + fmt("%.2f GB/s", slope / 1e9) + " vs bound " + fmt("%.2f GB/s", bound / 1e9) + " (" +
             fmt("%.2f%%", 100 * rel) + "), peak algbw " +
             fmt("%.2f GB/s", reps.back().achieved_bandwidth / 1e9) + (below ? "" : ", BOUND EXCEEDED");
  o.report = reports_to_csv(reps) + "# bound_bytes_per_s," + fmt("%.6e", bound) + "\n# asymptotic_bytes_per_s," +
             fmt("%.6e", slope) + "\n";
  return o;
}

// 3. Speedups over ring, synchronization included.
Outcome speedups(const Context& ctx) {
  const SimConfig cfg = SimConfig::dgx(8);
  const std::vector<std::uint64_t> small{1024, 2048, 4096, 8192};
  const std::uint64_t large = 64ULL << 20;
  std::vector<CollectiveSpec> specs;
  for (Algorithm alg : {Algorithm::Ring, Algorithm::Scin, Algorithm::ScinInq}) {
    for (auto m : small) specs.push_back(spec_of(alg, m));
    specs.push_back(spec_of(alg, large));
  }
  const auto reps = run_checked(cfg, specs, ctx);
  auto t = [&](Algorithm alg, std::uint64_t m) {
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if (specs[i].algorithm == alg && specs[i].message_size == m) return to_ns(reps[i].total_time);
    }
    throw std::logic_error("missing run");
  };

  bool ok = true;
  double min_small = 1e30;
  bool inq_order = true;
  for (auto m : small) {
    min_small = std::min(min_small, t(Algorithm::Ring, m) / t(Algorithm::Scin, m));
    if (m <= 4096) inq_order = inq_order && t(Algorithm::Scin, m) <= t(Algorithm::ScinInq, m);
  }
  const double big_scin = t(Algorithm::Ring, large) / t(Algorithm::Scin, large);
  const double big_inq = t(Algorithm::Ring, large) / t(Algorithm::ScinInq, large);
  ok = min_small >= 5.0 && big_scin >= 1.7 && big_inq >= 3.0 && inq_order;

  Outcome o;
  o.pass = ok;
  o.detail = "<=8KB min " + fmt("%.2fx", min_small) + " (8KB " +
             fmt("%.2fx", t(Algorithm::Ring, 8192) / t(Algorithm::Scin, 8192)) + "), 64MB SCIN " +
             fmt("%.2fx", big_scin) + ", 64MB INQ " + fmt("%.2fx", big_inq) + ", 4KB SCIN/INQ " +
             fmt("%.0f", t(Algorithm::Scin, 4096)) + "/" + fmt("%.0f ns", t(Algorithm::ScinInq, 4096)) +
             (inq_order ? "" : ", INQ FASTER AT SMALL SIZE");
  o.report = reports_to_csv(reps);
  return o;
}

// 4. Wave regulation and the minimum buffer.
Outcome waves(const Context& ctx) {
  const SimConfig cfg = SimConfig::dgx(8);
  const std::uint64_t size = 4 << 20;
  const auto pts = sweep_waves(cfg, 64 * 1024, {1, 2, 4, 8, 16, 32}, size, ctx.workers);
  auto bw = [&](std::uint32_t k) {
    for (const auto& p : pts) {
      if (p.waves == k) return p.bandwidth;
    }
    throw std::logic_error("missing wave point");
  };
  bool monotone = true, correct = true;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    correct = correct && pts[i].correct;
    if (i > 0) monotone = monotone && pts[i].bandwidth >= pts[i - 1].bandwidth;
  }
  const double full = std::max_element(pts.begin(), pts.end(), [](auto& a, auto& b) {
                        return a.bandwidth < b.bandwidth;
                      })->bandwidth;
  const double one = bw(1) / full;
  const double sixteen = bw(16) / bw(32);

  // A table of exactly the minimum size, filled with 128 B waves, against an
  // effectively unlimited one.
  const std::uint64_t minbuf = min_buffer_capacity(cfg.link_bandwidth_per_direction, cfg.link_latency,
                                                   cfg.accelerator_response_latency, cfg.flit_size);
  auto with_table = [&](std::uint64_t table) {
    SimConfig c = cfg;
    c.wave_size = cfg.max_payload;
    c.waves_per_table = static_cast<std::uint32_t>(table / c.wave_size);
    c.table_capacity = table;
    c.validate();
    const RunReport r = run_collective(c, spec_of(Algorithm::Scin, size, false, cfg.rng_seed));
    if (!r.correct) throw SimulationError("wave table run failed verification: " + r.failure);
    return r.achieved_bandwidth;
  };
  const double at_min = with_table(minbuf);
  const double unlimited = with_table(1 << 20);
  const double eq1 = at_min / unlimited;

  Outcome o;
  o.pass = correct && monotone && one <= 0.75 && sixteen >= 0.95 && eq1 >= 0.99;
  o.detail = "1 wave " + fmt("%.1f%%", 100 * one) + ", 16/32 waves " + fmt("%.1f%%", 100 * sixteen) +
             (monotone ? ", monotone" : ", NOT MONOTONE") + ", min table " + std::to_string(minbuf) + " B gives " +
             fmt("%.1f%%", 100 * eq1);
  std::ostringstream r;
  r << "waves,wave_size,bandwidth_gbps,fraction_of_best,correct\n";
  for (const auto& p : pts) {
    r << p.waves << ',' << p.wave_size << ',' << fmt("%.3f", p.bandwidth / 1e9) << ','
      << fmt("%.4f", p.fraction_of_best) << ',' << p.correct << '\n';
  }
  r << "# min_table_bytes," << minbuf << "\n# min_table_gbps," << fmt("%.3f", at_min / 1e9)
    << "\n# unlimited_table_gbps," << fmt("%.3f", unlimited / 1e9) << '\n';
  o.report = r.str();
  return o;
}

// Reference results restated from first principles.
std::vector<float> tree_reference(const Inputs& in) {
  std::vector<float> out(in[0].size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::vector<float> level;
    for (const auto& v : in) level.push_back(v[i]);
    while (level.size() > 1) {
      std::vector<float> next;
      for (std::size_t k = 0; k + 1 < level.size(); k += 2) next.push_back(level[k] + level[k + 1]);
      if (level.size() % 2) next.push_back(level.back());
      level.swap(next);
    }
    out[i] = round_to_half(level[0]);
  }
  return out;
}

std::vector<float> ring_reference(const Inputs& in, std::size_t chunk) {
  const std::size_t n = in.size();
  std::vector<float> out(in[0].size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t start = (i / chunk) % n;
    float acc = in[start][i];
    for (std::size_t hop = 1; hop < n; ++hop) acc = round_to_half(acc + in[(start + hop) % n][i]);
    out[i] = acc;
  }
  return out;
}

// 5. Bit-exact results on random instances.
Outcome oracles(const Context&) {
  const SimConfig cfg = SimConfig::dgx(8);
  SplitMix64 rng(2024);
  constexpr int kInstances = 120;
  const Algorithm algs[] = {Algorithm::Scin, Algorithm::Ring, Algorithm::ScinInq};
  const int ns[] = {2, 4, 8};
  int passed = 0;
  std::ostringstream r;
  r << "instance,algorithm,participants,mask,message_size,seed,bit_exact\n";
  for (int i = 0; i < kInstances; ++i) {
    const Algorithm alg = algs[i % 3];
    const int n = ns[(i / 3) % 3];
    std::vector<int> ids{0, 1, 2, 3, 4, 5, 6, 7};
    for (int k = 7; k > 0; --k) std::swap(ids[k], ids[rng.below(k + 1)]);
    std::uint64_t mask = 0;
    for (int k = 0; k < n; ++k) mask |= 1ULL << ids[k];
    // Log-uniform between 128 B and 1 MiB, whole fp16 elements.
    std::uint64_t bytes = static_cast<std::uint64_t>(128.0 * std::exp2(13.0 * rng.uniform())) & ~1ULL;
    bytes = std::clamp<std::uint64_t>(bytes, 128, 1 << 20);

    CollectiveSpec s = spec_of(alg, bytes, true, 1000 + i);
    s.participants = mask;
    RunDetails d;
    RunOptions opts;
    opts.details = &d;
    run_collective(cfg, s, opts);
    std::vector<float> want;
    if (alg == Algorithm::Scin) {
      want = tree_reference(d.inputs);
    } else if (alg == Algorithm::Ring) {
      want = ring_reference(d.inputs, d.chunk_elements);
    } else {
      want = simulate_inq_path(d.inputs, inq_spec(cfg)).output;
      for (auto& v : want) v = round_to_half(v);
    }
    bool exact = d.outputs.size() == static_cast<std::size_t>(n);
    for (const auto& out : d.outputs) {
      exact = exact && out.size() == want.size();
      for (std::size_t e = 0; exact && e < out.size(); ++e) exact = float_to_half(out[e]) == float_to_half(want[e]);
    }
    passed += exact;
    char mask_hex[16];
    std::snprintf(mask_hex, sizeof mask_hex, "0x%02llx", static_cast<unsigned long long>(mask));
    r << i << ',' << to_string(alg) << ',' << n << ',' << mask_hex << ',' << bytes << ',' << s.seed << ',' << exact
      << '\n';
  }
  Outcome o;
  o.pass = passed == kInstances;
  o.detail = std::to_string(passed) + "/" + std::to_string(kInstances) + " instances bit-exact (SCIN, ring, INQ)";
  o.report = r.str();
  return o;
}

// 6. Quantization properties.
Outcome quantization(const Context&) {
  QuantBlockSpec spec;  // 8 bit, 64-element blocks, fp16 scales

  // Round trip over a million values with block magnitudes spread over decades.
  SplitMix64 rng(6);
  std::vector<float> x(1'000'000);
  for (std::size_t b = 0; b < x.size(); b += spec.block_size) {
    const double mag = std::pow(10.0, -3 + 6 * rng.uniform());
    for (std::size_t i = b; i < std::min(x.size(), b + spec.block_size); ++i) {
      x[i] = static_cast<float>(rng.normal() * mag);
    }
  }
  const auto q = quantize(x, spec);
  const auto back = dequantize(q);
  std::size_t violations = 0, checked = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::abs(q.codes[i]) == spec.qmax()) continue;
    ++checked;
    const float scale = q.scales[i / spec.block_size];
    if (std::abs(back[i] - x[i]) > scale / 2 * (1 + 1e-6f)) ++violations;
  }

  std::vector<ErrorTrial> trials;
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    trials.push_back(run_error_trial(seed, 8, 4096, spec));
    wins += trials.back().mse_inq <= trials.back().mse_rq;
  }

  bool events_ok = true;
  for (int n : {2, 4, 8, 16}) {
    std::vector<std::vector<float>> in;
    SplitMix64 g(static_cast<std::uint64_t>(n));
    for (int k = 0; k < n; ++k) {
      std::vector<float> v(1024);
      for (auto& e : v) e = static_cast<float>(g.normal());
      in.push_back(std::move(v));
    }
    const auto p = simulate_inq_path(in, spec);
    events_ok = events_ok && std::all_of(p.events.begin(), p.events.end(), [](auto e) { return e == 2; });
  }
  const double ratio = compression_ratio(spec, 2.0);

  Outcome o;
  o.pass = violations == 0 && checked > 0 && wins >= 990 && events_ok && std::abs(ratio - 1.94) <= 0.005;
  o.detail = "round-trip violations " + std::to_string(violations) + "/" + std::to_string(checked) +
             ", INQ<=RQ in " + std::to_string(wins) + "/1000, events " + (events_ok ? "2" : "WRONG") +
             " for N=2..16, compression " + fmt("%.4f", ratio);
  o.report = error_trials_to_csv(trials) + "# roundtrip_checked," + std::to_string(checked) +
             "\n# roundtrip_violations," + std::to_string(violations) + "\n# compression_ratio," +
             fmt("%.6f", ratio) + "\n";
  return o;
}

// 7. End-to-end model on the bundled data.
Outcome llm(const Context& ctx) {
  const auto tables = parse_latency_csv(read_text(ctx.data / "latency_dgx8.csv"));
  const CommModels models = comm_models_from_tables(tables);
  const ComputeProfile prof = load_profile_csv(ctx.data / "profile_synthetic.csv");
  const ModelShape shape;
  const std::uint32_t tp = 8;
  const std::string prec = "fp16";

  double max_ttft = 0, max_tpot = 0, max_fp = 0, max_fd = 0;
  std::vector<LlmRow> rows;
  for (const auto& [key, ns] : prof.entries()) {
    (void)ns;
    if (key.stage != Stage::Prefill || key.tp != tp || key.precision != prec) continue;
    const InferenceWorkload w{key.batch, key.seq_len, 64};
    const auto e = estimate_ttft_tpot(prof, shape, w, tp, prec, models.ring, models.scin_inq);
    max_ttft = std::max(max_ttft, e.ttft_speedup);
    max_tpot = std::max(max_tpot, e.tpot_speedup);
    max_fp = std::max(max_fp, comm_fraction(e.baseline, Stage::Prefill));
    max_fd = std::max(max_fd, comm_fraction(e.baseline, Stage::Decode));
    rows.push_back({w.label(), "scin-inq", e.candidate.ttft_ns, e.candidate.tpot_ns, e.ttft_speedup, e.tpot_speedup});
  }
  const bool calibrated = std::abs(max_fp - 0.47) < 1e-6 && std::abs(max_fd - 0.25) < 1e-6;
  const bool in_range = max_ttft >= 1.3 && max_ttft <= 1.9 && max_tpot >= 1.1 && max_tpot <= 1.4;

  // Identity check: a single-workload profile has exactly the target share.
  double worst = 0;
  for (double f : {0.2, 0.47, 0.59}) {
    for (auto [b, s] : std::vector<std::pair<std::uint32_t, std::uint32_t>>{{1, 128}, {1, 2048}, {4, 2048}}) {
      SyntheticProfileParams p;
      p.prefill_comm_fraction = f;
      p.grid = {{b, s}};
      const ComputeProfile single = generate_synthetic_profile(p, models.ring);
      const InferenceWorkload w{b, s, 64};
      const auto e = estimate_ttft_tpot(single, shape, w, tp, prec, models.ring, models.scin_inq);
      const double s_comm = e.baseline.prefill_comm_ns / e.candidate.prefill_comm_ns;
      const double want = 1 / ((1 - f) + f / s_comm);
      worst = std::max(worst, std::abs(e.ttft_speedup - want) / want);
    }
  }

  // The bundled latency table must be what the simulator produces today.
  const SimConfig cfg = SimConfig::dgx(8);
  std::vector<CollectiveSpec> specs;
  for (Algorithm a : {Algorithm::Ring, Algorithm::Scin, Algorithm::ScinInq}) specs.push_back(spec_of(a, 8192));
  const auto fresh = run_checked(cfg, specs, ctx);
  bool reproduces = true;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const double bundled = tables.at(to_string(specs[i].algorithm)).at(8192);
    reproduces = reproduces && std::abs(bundled - to_ns(fresh[i].total_time)) < 1e-3;
  }

  Outcome o;
  o.pass = calibrated && in_range && worst <= 0.01 && reproduces;
  o.detail = "max TTFT " + fmt("%.3fx", max_ttft) + ", max TPOT " + fmt("%.3fx", max_tpot) + " (comm share " +
             fmt("%.3f", max_fp) + "/" + fmt("%.3f", max_fd) + "), identity error " + fmt("%.2e", worst) +
             (reproduces ? ", bundled table reproduced" : ", BUNDLED TABLE STALE");
  o.report = llm_rows_to_csv(rows) + "# identity_max_rel_error," + fmt("%.3e", worst) + "\n";
  return o;
}

// 8. Node-count scaling.
Outcome scaling(const Context& ctx) {
  std::vector<CollectiveSpec> specs;
  const std::vector<std::uint64_t> sizes{4096, 8192};
  for (Algorithm a : {Algorithm::Scin, Algorithm::Ring}) {
    for (auto m : sizes) specs.push_back(spec_of(a, m));
  }
  const auto r8 = run_checked(SimConfig::dgx(8), specs, ctx);
  const auto r16 = run_checked(SimConfig::dgx(16), specs, ctx);
  bool ok = true;
  double worst_scin = 0, min_ring = 1e30;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const double g = to_ns(r16[i].total_time) / to_ns(r8[i].total_time) - 1;
    if (specs[i].algorithm == Algorithm::Scin) {
      worst_scin = std::max(worst_scin, g);
      ok = ok && g < 0.10;
    } else {
      min_ring = std::min(min_ring, g);
      ok = ok && g > 0;
    }
  }
  Outcome o;
  o.pass = ok;
  o.detail = "SCIN growth 8->16 at most " + fmt("%.1f%%", 100 * worst_scin) + ", ring growth at least " +
             fmt("%.1f%%", 100 * min_ring);
  o.report = reports_to_csv(r8) + reports_to_csv(r16);
  return o;
}

struct Criterion {
  int number;
  const char* name;
  std::function<Outcome(const Context&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scinsim acceptance checks"};
  std::string out_dir = "acceptance_reports";
  std::string data_dir = std::string(SCINSIM_SOURCE_DIR) + "/data";
  std::vector<int> only;
  Context ctx;
  ctx.workers = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--out", out_dir, "Directory for the per-criterion reports");
  app.add_option("--data", data_dir, "Directory with the bundled latency table and profile");
  app.add_option("--only", only, "Run only these criteria (1-8); determinism covers what ran");
  app.add_option("--workers", ctx.workers, "Parallel simulations")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);
  ctx.data = data_dir;

  const std::vector<Criterion> criteria{
      {1, "calibration", calibration}, {2, "ring bound", ring_bound}, {3, "speedups", speedups},
      {4, "wave regulation", waves},   {5, "oracles", oracles},        {6, "quantization", quantization},
      {7, "llm model", llm},           {8, "scaling", scaling},
  };

  auto attempt = [&](const Criterion& c) {
    try {
      return c.run(ctx);
    } catch (const std::exception& e) {
      Outcome o;
      o.detail = std::string("error: ") + e.what();
      return o;
    }
  };

  fs::create_directories(out_dir);
  bool all = true;
  std::map<int, Outcome> first;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.number) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o = attempt(c);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_text(fs::path(out_dir) / ("criterion_" + std::to_string(c.number) + ".csv"), o.report);
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << c.number << " " << c.name << ": " << o.detail << " ["
              << fmt("%.1f s", secs) << "]" << std::endl;
    all = all && o.pass;
    first[c.number] = std::move(o);
  }

  // 9. Rerun everything with the same seeds; reports must be byte-identical.
  std::vector<int> differing;
  for (const auto& c : criteria) {
    if (!first.count(c.number)) continue;
    const Outcome again = attempt(c);
    if (again.report != first[c.number].report || first[c.number].report.empty()) differing.push_back(c.number);
  }
  const bool same = differing.empty() && !first.empty();
  std::string detail = std::to_string(first.size()) + " criteria rerun, ";
  if (same) {
    detail += "all reports byte-identical";
  } else {
    detail += "differing:";
    for (int n : differing) detail += " " + std::to_string(n);
  }
  std::cout << (same ? "PASS" : "FAIL") << "  9 determinism: " << detail << std::endl;
  all = all && same;
  return all ? 0 : 1;
}
