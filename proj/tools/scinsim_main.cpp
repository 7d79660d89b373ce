// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

// scinsim: command-line experiment runner.
//
// Exit codes: 0 success, 1 correctness or simulation failure, 2 bad input.

#include <bit>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "scinsim/collectives.hpp"
#include "scinsim/config.hpp"
#include "scinsim/experiments.hpp"
#include "scinsim/io.hpp"
#include "scinsim/isa.hpp"
#include "scinsim/llm_perf.hpp"
#include "scinsim/quant.hpp"

namespace fs = std::filesystem;
using namespace scinsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitBadInput = 2;

/// Loads a config file, or one of the built-in presets by name.
SimConfig resolve_config(const std::string& arg, const SimConfig& fallback) {
  if (arg.empty()) return fallback;
  if (!fs::exists(arg)) {
    if (arg == "dgx8") return SimConfig::dgx(8);
    if (arg == "dgx16") return SimConfig::dgx(16);
    if (arg == "prototype") return SimConfig::prototype();
  }
  return load_config(arg);
}

fs::path default_out() {
  const char* env = std::getenv("SCINSIM_OUT");
  return env && *env ? fs::path(env) : fs::path("scinsim_out");
}

std::vector<std::uint64_t> parse_sizes(const std::vector<std::string>& items, const char* field) {
  std::vector<std::uint64_t> out;
  for (const auto& s : items) out.push_back(parse_byte_quantity(s, field));
  return out;
}

/// "BxS" pairs, e.g. "1x2048".
std::vector<std::pair<std::uint32_t, std::uint32_t>> parse_grid(const std::vector<std::string>& items) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  for (const auto& s : items) {
    const auto x = s.find('x');
    if (x == std::string::npos) throw ConfigError("grid", 0, "expected BxS, got '" + s + "'");
    try {
      out.emplace_back(std::stoul(s.substr(0, x)), std::stoul(s.substr(x + 1)));
    } catch (const std::exception&) {
      throw ConfigError("grid", 0, "expected BxS, got '" + s + "'");
    }
  }
  return out;
}

Inputs load_inputs(const SpecEntry& e, const SimConfig& cfg) {
  const std::uint64_t mask = e.spec.participants ? e.spec.participants : (cfg.num_accelerators >= 64
                                                                               ? ~0ULL
                                                                               : (1ULL << cfg.num_accelerators) - 1);
  const auto n = static_cast<std::size_t>(std::popcount(mask));
  if (e.input_files.size() != n) {
    throw ConfigError("inputs", 0,
                      "expected " + std::to_string(n) + " input tensors, got " + std::to_string(e.input_files.size()));
  }
  const std::size_t elems = e.spec.message_size / element_size(cfg.dtype);
  Inputs in;
  for (const auto& f : e.input_files) {
    TensorFile t = read_tensor(f);
    if (t.dtype != cfg.dtype) throw ConfigError(f.string(), 0, "tensor dtype does not match the config dtype");
    if (t.elements() != elems) {
      throw ConfigError(f.string(), 0, "tensor holds " + std::to_string(t.elements()) + " elements, spec needs " +
                                           std::to_string(elems));
    }
    in.push_back(t.to_floats());
  }
  return in;
}

fs::path trace_path(const fs::path& base, std::size_t i, std::size_t count) {
  if (count == 1) return base;
  fs::path p = base;
  p.replace_filename(base.stem().string() + "_" + std::to_string(i) + base.extension().string());
  return p;
}

int report_calibration(const SimConfig& cfg, const fs::path& out, unsigned workers) {
  const auto pts = calibrate(cfg, {}, workers);
  write_text(out / "calibration.csv", calibration_to_csv(pts));
  bool ok = true;
  for (const auto& p : pts) {
    std::cout << (p.pass ? "PASS " : "FAIL ") << p.name << ": simulated " << p.simulated << " " << p.unit
              << ", reference " << p.reference << ", relative error " << p.relative_error << "\n";
    ok = ok && p.pass;
  }
  return ok ? kExitOk : kExitFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scinsim: cycle-level simulator for in-switch All-Reduce"};
  app.require_subcommand(1);

  std::string config_arg;
  std::string out_arg;
  unsigned workers = 1;

  // run
  auto* run = app.add_subcommand("run", "Run collective specs and write report.csv / report.json");
  std::string spec_arg, trace_arg;
  std::uint64_t seed = 0;
  bool also_calibrate = false;
  run->add_option("--config", config_arg, "Config file or preset (dgx8, dgx16, prototype)");
  run->add_option("--spec", spec_arg, "Spec file (JSON)")->required();
  run->add_option("--out", out_arg, "Output directory (default $SCINSIM_OUT or ./scinsim_out)");
  run->add_option("--seed", seed, "Override every spec's seed");
  run->add_option("--trace", trace_arg, "Write a per-packet trace (forces one worker)");
  run->add_option("--workers", workers, "Parallel simulations")->check(CLI::PositiveNumber);
  run->add_flag("--calibrate", also_calibrate, "Also run the prototype calibration");

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "Compare the prototype config against measured reference points");
  cal->add_option("--config", config_arg, "Config file or preset (default prototype)");
  cal->add_option("--out", out_arg, "Output directory");
  cal->add_option("--workers", workers, "Parallel simulations")->check(CLI::PositiveNumber);

  // sweep-waves
  auto* sw = app.add_subcommand("sweep-waves", "SCIN bandwidth against wave count for a fixed table size");
  std::string buffer_arg = "64KB", size_arg = "4MB";
  std::vector<std::uint32_t> waves;
  sw->add_option("--config", config_arg, "Config file or preset (default dgx8)");
  sw->add_option("--buffer", buffer_arg, "Table capacity per accelerator");
  sw->add_option("--size", size_arg, "Message size");
  sw->add_option("--waves", waves, "Wave counts (default 1..32)");
  sw->add_option("--out", out_arg, "Output directory");
  sw->add_option("--workers", workers, "Parallel simulations")->check(CLI::PositiveNumber);

  // latency-table
  auto* lt = app.add_subcommand("latency-table", "Simulated All-Reduce latency by algorithm and message size");
  std::vector<std::string> algorithms{"ring", "scin", "scin-inq"};
  std::vector<std::string> sizes;
  std::uint64_t lt_seed = 1;
  lt->add_option("--config", config_arg, "Config file or preset (default dgx8)");
  lt->add_option("--algorithms", algorithms, "Algorithms");
  lt->add_option("--sizes", sizes, "Message sizes")->required();
  lt->add_option("--seed", lt_seed, "Input seed");
  lt->add_option("--out", out_arg, "Output directory");
  lt->add_option("--workers", workers, "Parallel simulations")->check(CLI::PositiveNumber);

  // gen-profile
  auto* gp = app.add_subcommand("gen-profile", "Synthetic compute profile matched to target comm fractions");
  std::string latency_arg;
  std::vector<std::string> grid;
  SyntheticProfileParams sp;
  gp->add_option("--latency", latency_arg, "Latency table CSV (needs a ring column)")->required();
  gp->add_option("--grid", grid, "Workloads as BxS")->required();
  gp->add_option("--prefill-fraction", sp.prefill_comm_fraction, "Largest ring comm share of prefill over the grid");
  gp->add_option("--decode-fraction", sp.decode_comm_fraction, "Largest ring comm share of decode over the grid");
  gp->add_option("--attention-share", sp.decode_attention_share, "Decode compute share that scales with b*s, at the smallest workload");
  gp->add_option("--out", out_arg, "Output directory");

  // llm
  auto* llm = app.add_subcommand("llm", "TTFT/TPOT of SCIN against the ring baseline");
  std::string profile_arg;
  ModelShape shape;
  std::uint32_t tp = 8, tokens = 64;
  std::string precision = "fp16";
  llm->add_option("--profile", profile_arg, "Compute profile CSV")->required();
  llm->add_option("--latency", latency_arg, "Latency table CSV (ring, scin, scin-inq)")->required();
  llm->add_option("--layers", shape.num_layers, "Transformer layers");
  llm->add_option("--hidden", shape.hidden_size, "Hidden size");
  llm->add_option("--tp", tp, "Tensor-parallel degree");
  llm->add_option("--precision", precision, "Profile precision key");
  llm->add_option("--tokens", tokens, "Output tokens");
  llm->add_option("--out", out_arg, "Output directory");

  // error-study
  auto* es = app.add_subcommand("error-study", "Quantization error of INQ against per-hop requantization");
  int trials = 1000, n = 8;
  QuantBlockSpec qspec;
  std::size_t elements = 4096;
  std::uint64_t es_seed = 1;
  es->add_option("--trials", trials, "Gaussian trials")->check(CLI::PositiveNumber);
  es->add_option("--n", n, "Participants")->check(CLI::Range(2, 64));
  es->add_option("--bits", qspec.bits, "Code width (4 or 8)");
  es->add_option("--block", qspec.block_size, "Block size");
  es->add_option("--elements", elements, "Elements per input")->check(CLI::PositiveNumber);
  es->add_option("--seed", es_seed, "First seed");
  es->add_option("--out", out_arg, "Output directory");

  // validate-program
  auto* vp = app.add_subcommand("validate-program", "Check an instruction program against a config");
  std::string program_arg;
  vp->add_option("--config", config_arg, "Config file or preset (default dgx8)");
  vp->add_option("--program", program_arg, "Program JSON")->required();

  // show-config
  auto* sc = app.add_subcommand("show-config", "Print a resolved config");
  sc->add_option("--config", config_arg, "Config file or preset (default dgx8)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitBadInput;
  }

  const fs::path out = out_arg.empty() ? default_out() : fs::path(out_arg);
  try {
    if (*run) {
      SimConfig cfg = resolve_config(config_arg, SimConfig::dgx());
      if (seed) cfg.rng_seed = seed;
      cfg.validate();
      auto entries = load_specs(spec_arg);
      std::vector<CollectiveSpec> specs;
      std::vector<Inputs> inputs;
      bool any_inputs = false;
      for (auto& e : entries) {
        if (seed) e.spec.seed = seed;
        specs.push_back(e.spec);
        inputs.push_back(e.input_files.empty() ? Inputs{} : load_inputs(e, cfg));
        any_inputs = any_inputs || !e.input_files.empty();
      }
      std::vector<RunReport> reports;
      if (!trace_arg.empty()) {
        for (std::size_t i = 0; i < specs.size(); ++i) {
          const fs::path tp_path = trace_path(trace_arg, i, specs.size());
          if (tp_path.has_parent_path()) fs::create_directories(tp_path.parent_path());
          std::ofstream trace(tp_path);
          RunOptions opts;
          opts.trace = &trace;
          if (!inputs[i].empty()) opts.inputs = &inputs[i];
          reports.push_back(run_collective(cfg, specs[i], opts));
        }
      } else {
        reports = run_specs(cfg, specs, workers, any_inputs ? &inputs : nullptr);
      }
      write_text(out / "report.csv", reports_to_csv(reports));
      write_text(out / "report.json", reports_to_json(reports));
      int rc = kExitOk;
      for (const auto& r : reports) {
        std::cout << r.algorithm << " " << r.message_size << " B: " << to_ns(r.total_time) << " ns, "
                  << r.achieved_bandwidth / 1e9 << " GB/s, " << (r.correct ? "correct" : "INCORRECT") << "\n";
        if (!r.correct) {
          std::cerr << "correctness failure: " << r.failure << "\n";
          rc = kExitFailed;
        }
      }
      std::cout << reports.size() << " run(s), reports in " << out.string() << "\n";
      if (also_calibrate) {
        const int cal_rc = report_calibration(SimConfig::prototype(), out, workers);
        if (rc == kExitOk) rc = cal_rc;
      }
      return rc;
    }
    if (*cal) {
      SimConfig cfg = resolve_config(config_arg, SimConfig::prototype());
      cfg.validate();
      return report_calibration(cfg, out, workers);
    }
    if (*sw) {
      SimConfig cfg = resolve_config(config_arg, SimConfig::dgx());
      cfg.validate();
      if (waves.empty()) {
        for (std::uint32_t k = 1; k <= 32; ++k) waves.push_back(k);
      }
      const auto pts = sweep_waves(cfg, parse_byte_quantity(buffer_arg, "buffer"), waves,
                                   parse_byte_quantity(size_arg, "size"), workers);
      std::string csv = "waves,wave_size,bandwidth_gbps,fraction_of_best,saturated,correct\n";
      char buf[160];
      bool ok = true;
      for (const auto& p : pts) {
        std::snprintf(buf, sizeof buf, "%u,%llu,%.6f,%.6f,%d,%d\n", p.waves,
                      static_cast<unsigned long long>(p.wave_size), p.bandwidth / 1e9, p.fraction_of_best,
                      p.saturated ? 1 : 0, p.correct ? 1 : 0);
        csv += buf;
        ok = ok && p.correct;
      }
      write_text(out / "waves.csv", csv);
      std::cout << csv;
      return ok ? kExitOk : kExitFailed;
    }
    if (*lt) {
      SimConfig cfg = resolve_config(config_arg, SimConfig::dgx());
      cfg.validate();
      std::vector<Algorithm> algs;
      for (const auto& a : algorithms) algs.push_back(algorithm_from_string(a));
      const auto tables = simulate_latency_table(cfg, algs, parse_sizes(sizes, "sizes"), lt_seed, workers);
      write_text(out / "latency.csv", latency_to_csv(tables));
      std::cout << latency_to_csv(tables);
      return kExitOk;
    }
    if (*gp) {
      const auto tables = parse_latency_csv(read_text(latency_arg));
      auto it = tables.find("ring");
      if (it == tables.end()) throw ConfigError("algorithm", 0, "latency table lacks 'ring'");
      sp.grid = parse_grid(grid);
      const ComputeProfile prof = generate_synthetic_profile(sp, CommModel{"ring", it->second, it->second});
      write_text(out / "profile.csv", profile_to_csv(prof));
      std::cout << profile_to_csv(prof);
      return kExitOk;
    }
    if (*llm) {
      const ComputeProfile prof = load_profile_csv(profile_arg);
      const CommModels models = comm_models_from_tables(parse_latency_csv(read_text(latency_arg)));
      std::vector<LlmRow> rows;
      for (const auto& [key, ns] : prof.entries()) {
        (void)ns;
        if (key.stage != Stage::Prefill || key.tp != tp || key.precision != precision) continue;
        const InferenceWorkload w{key.batch, key.seq_len, tokens};
        for (const CommModel* cand : {&models.ring, &models.scin, &models.scin_inq}) {
          const SpeedupEstimate e = estimate_ttft_tpot(prof, shape, w, tp, precision, models.ring, *cand);
          rows.push_back({w.label(), cand->name, e.candidate.ttft_ns, e.candidate.tpot_ns, e.ttft_speedup,
                          e.tpot_speedup});
        }
      }
      write_text(out / "llm.csv", llm_rows_to_csv(rows));
      std::cout << llm_rows_to_csv(rows);
      return kExitOk;
    }
    if (*es) {
      qspec.validate();
      std::vector<ErrorTrial> rows;
      int inq_wins = 0;
      for (int t = 0; t < trials; ++t) {
        rows.push_back(run_error_trial(es_seed + static_cast<std::uint64_t>(t), n, elements, qspec));
        inq_wins += rows.back().mse_inq <= rows.back().mse_rq ? 1 : 0;
      }
      write_text(out / "errors.csv", error_trials_to_csv(rows));
      std::cout << "INQ MSE <= RQ MSE in " << inq_wins << " of " << trials << " trials\n";
      return kExitOk;
    }
    if (*vp) {
      const SimConfig cfg = resolve_config(config_arg, SimConfig::dgx());
      cfg.validate();
      const auto prog = load_program(program_arg, cfg);
      std::cout << "program OK: " << prog.size() << " instruction(s)\n";
      return kExitOk;
    }
    if (*sc) {
      const SimConfig cfg = resolve_config(config_arg, SimConfig::dgx());
      cfg.validate();
      std::cout << dump_config(cfg);
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << "simulation failed: " << e.what() << "\n";
    return kExitFailed;
  }
  return kExitOk;
}
