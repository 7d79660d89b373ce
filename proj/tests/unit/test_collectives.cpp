// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <vector>

#include <gtest/gtest.h>

#include "scinsim/collectives.hpp"
#include "scinsim/half.hpp"

namespace scinsim {
namespace {

// Scalar oracles written out independently of the library versions.

// Adjacent pairs per level, odd element carried up, fp32 sums, one final
// rounding to fp16.
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

// Chunk c is owned first by rank c mod n and passes through the ranks after
// it, rounding to fp16 at every hop.
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

CollectiveSpec make(Algorithm a, std::uint64_t bytes, std::uint64_t seed = 1, std::uint64_t participants = 0) {
  CollectiveSpec s;
  s.algorithm = a;
  s.message_size = bytes;
  s.seed = seed;
  s.participants = participants;
  return s;
}

void expect_all_equal(const RunDetails& d, const std::vector<float>& want) {
  for (std::size_t r = 0; r < d.outputs.size(); ++r) {
    ASSERT_EQ(d.outputs[r].size(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
      // Compare as bits so -0 and +0 are told apart.
      ASSERT_EQ(float_to_half(d.outputs[r][i]), float_to_half(want[i])) << "rank " << r << " elem " << i;
    }
  }
}

struct Case {
  std::uint64_t participants;
  std::uint64_t bytes;
};

class Oracle : public ::testing::TestWithParam<Case> {};

TEST_P(Oracle, ScinMatchesTreeReference) {
  const SimConfig cfg;
  RunDetails d;
  RunOptions o;
  o.details = &d;
  const auto r = run_collective(cfg, make(Algorithm::Scin, GetParam().bytes, 21, GetParam().participants), o);
  EXPECT_TRUE(r.correct) << r.failure;
  expect_all_equal(d, tree_reference(d.inputs));
}

TEST_P(Oracle, RingMatchesRingReference) {
  const SimConfig cfg;
  RunDetails d;
  RunOptions o;
  o.details = &d;
  const auto r = run_collective(cfg, make(Algorithm::Ring, GetParam().bytes, 22, GetParam().participants), o);
  EXPECT_TRUE(r.correct) << r.failure;
  expect_all_equal(d, ring_reference(d.inputs, d.chunk_elements));
}

TEST_P(Oracle, InqMatchesQuantizedPath) {
  const SimConfig cfg;
  RunDetails d;
  RunOptions o;
  o.details = &d;
  const auto r = run_collective(cfg, make(Algorithm::ScinInq, GetParam().bytes, 23, GetParam().participants), o);
  EXPECT_TRUE(r.correct) << r.failure;
  const auto want = simulate_inq_path(d.inputs, inq_spec(cfg)).output;
  for (const auto& out : d.outputs) {
    for (std::size_t i = 0; i < out.size(); ++i) ASSERT_EQ(float_to_half(out[i]), float_to_half(round_to_half(want[i])));
  }
}

INSTANTIATE_TEST_SUITE_P(Shapes, Oracle,
                         ::testing::Values(Case{0b11, 128}, Case{0b1111, 4096}, Case{0xFF, 130},
                                           Case{0b10100101, 20000}, Case{0b111, 6 * 4096}, Case{0xFF, 64 * 1024}));

TEST(Collectives, ZerosStayZero) {
  const SimConfig cfg;
  for (Algorithm a : {Algorithm::Scin, Algorithm::ScinInq, Algorithm::Ring, Algorithm::NvlsLike}) {
    auto s = make(a, 8192);
    s.pattern = InputPattern::Zeros;
    RunDetails d;
    RunOptions o;
    o.details = &d;
    const auto r = run_collective(cfg, s, o);
    EXPECT_TRUE(r.correct) << to_string(a);
    for (const auto& out : d.outputs) EXPECT_TRUE(std::all_of(out.begin(), out.end(), [](float v) { return v == 0; }));
  }
}

TEST(Collectives, IntegersSumExactly) {
  const SimConfig cfg;
  for (Algorithm a : {Algorithm::Scin, Algorithm::Ring, Algorithm::NvlsLike}) {
    auto s = make(a, 4096, 7);
    s.pattern = InputPattern::Integers;
    RunDetails d;
    RunOptions o;
    o.details = &d;
    run_collective(cfg, s, o);
    const auto ex = exact_sum(d.inputs);
    for (const auto& out : d.outputs) {
      for (std::size_t i = 0; i < out.size(); ++i) ASSERT_EQ(out[i], ex[i]) << to_string(a);
    }
  }
}

TEST(Collectives, SameSeedSameReport) {
  const SimConfig cfg;
  for (Algorithm a : {Algorithm::Scin, Algorithm::Ring, Algorithm::NvlsLike, Algorithm::ScinInq}) {
    const auto x = run_collective(cfg, make(a, 32768, 5));
    const auto y = run_collective(cfg, make(a, 32768, 5));
    EXPECT_EQ(x.total_cycles, y.total_cycles) << to_string(a);
    EXPECT_EQ(x.correctness_digest, y.correctness_digest) << to_string(a);
    EXPECT_NE(x.correctness_digest, run_collective(cfg, make(a, 32768, 6)).correctness_digest) << to_string(a);
  }
}

TEST(Collectives, ReorderingChangesTimingNotValues) {
  SimConfig cfg;
  cfg.reorder_window = 8;
  const auto a = run_collective(cfg, make(Algorithm::Scin, 65536, 3));
  cfg.rng_seed = 99;
  const auto b = run_collective(cfg, make(Algorithm::Scin, 65536, 3));
  EXPECT_TRUE(a.correct);
  EXPECT_TRUE(b.correct);
  EXPECT_EQ(a.correctness_digest, b.correctness_digest);
}

TEST(Collectives, RingMovesTwiceNMinusOneChunks) {
  const SimConfig cfg;
  const auto r = run_collective(cfg, make(Algorithm::Ring, 8 * 4096));
  EXPECT_EQ(r.payload_bytes_moved, 2u * 7 * 4096);
  EXPECT_EQ(r.padding_bytes, 0u);
  const auto odd = run_collective(cfg, make(Algorithm::Ring, 8 * 4096 + 2));
  EXPECT_EQ(odd.padding_bytes, 8u * 2 * 2049 - (8 * 4096 + 2));
  EXPECT_TRUE(odd.correct);
}

TEST(Collectives, ScinReadsEachInputOnce) {
  const SimConfig cfg;
  const auto r = run_collective(cfg, make(Algorithm::Scin, 65536));
  EXPECT_EQ(r.payload_bytes_moved, 65536u);
  const auto q = run_collective(cfg, make(Algorithm::ScinInq, 65536));
  // Codes plus scales: about half the bytes.
  EXPECT_EQ(q.payload_bytes_moved, 32768u + cfg.scale_bytes_for(32768));
}

TEST(Collectives, HopCounts) {
  const SimConfig cfg;
  const auto scin = run_collective(cfg, make(Algorithm::Scin, 8192));
  EXPECT_EQ(scin.max_sync_hops, 1);
  EXPECT_EQ(scin.max_data_hops, 2);
  const auto ring = run_collective(cfg, make(Algorithm::Ring, 8192));
  EXPECT_EQ(ring.max_data_hops, 2);
  const auto nvls = run_collective(cfg, make(Algorithm::NvlsLike, 8192));
  // Reduced data returns to the initiator before the multicast store, and
  // arrivals go accelerator to accelerator through the switch.
  EXPECT_EQ(nvls.max_data_hops, 2 * scin.max_data_hops);
  EXPECT_EQ(nvls.max_sync_hops, 2 * scin.max_sync_hops);
}

TEST(Collectives, SmallMessageOrdering) {
  const SimConfig cfg;
  for (std::uint64_t m : {4096ULL, 16384ULL, 65536ULL}) {
    const auto scin = run_collective(cfg, make(Algorithm::Scin, m));
    const auto nvls = run_collective(cfg, make(Algorithm::NvlsLike, m));
    const auto ring = run_collective(cfg, make(Algorithm::Ring, m));
    EXPECT_LT(scin.total_time, nvls.total_time) << m;
    EXPECT_LT(nvls.total_time, ring.total_time) << m;
  }
}

TEST(Collectives, SyncExcludedIsShorter) {
  const SimConfig cfg;
  auto with = make(Algorithm::Scin, 4096);
  auto without = with;
  without.include_sync = false;
  const auto a = run_collective(cfg, with);
  const auto b = run_collective(cfg, without);
  EXPECT_LT(b.total_time, a.total_time);
  EXPECT_EQ(a.phase_sum(), a.total_time);
  EXPECT_GT(a.sync_overhead.count(), 0);
}

TEST(Collectives, LateArrivalDelaysCompletion) {
  const SimConfig cfg;
  auto s = make(Algorithm::Scin, 4096);
  const auto base = run_collective(cfg, s);
  s.arrivals = {Picoseconds(0), Picoseconds(5'000'000)};
  const auto late = run_collective(cfg, s);
  EXPECT_TRUE(late.correct);
  // Time counts from the last arrival.
  EXPECT_EQ(late.total_time, base.total_time);
}

TEST(Collectives, RejectsDegenerateSpecs) {
  const SimConfig cfg;
  EXPECT_THROW(run_collective(cfg, make(Algorithm::Scin, 4096, 1, 0b1)), ConfigError);
  EXPECT_THROW(run_collective(cfg, make(Algorithm::Ring, 4096, 1, 1ULL << 12)), ConfigError);
  EXPECT_THROW(run_collective(cfg, make(Algorithm::Scin, 4095)), ConfigError);
  EXPECT_THROW(algorithm_from_string("tree"), ConfigError);
  EXPECT_EQ(algorithm_from_string("nvls-like"), Algorithm::NvlsLike);
}

}  // namespace
}  // namespace scinsim
