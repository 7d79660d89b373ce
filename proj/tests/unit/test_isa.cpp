// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <bit>
#include <cstring>
#include <map>
#include <optional>
#include <vector>

#include <gtest/gtest.h>

#include "scinsim/collectives.hpp"
#include "scinsim/half.hpp"
#include "scinsim/isa.hpp"
#include "scinsim/machine.hpp"

namespace scinsim {
namespace {

// Arrives every participant at cycle 0 and records what each accelerator sees.
class ProbeDriver : public Driver, public EndpointListener {
 public:
  ProbeDriver(Machine& m, std::uint32_t id, std::uint64_t participants, std::uint64_t destinations,
              std::vector<int> switches)
      : m_(m), id_(id), participants_(participants), destinations_(destinations), switches_(std::move(switches)) {
    for (int a = 0; a < m.config().num_accelerators; ++a) m.endpoint(a).set_listener(this);
  }

  void tick(Cycle c) override {
    if (arrived_) return;
    arrived_ = true;
    for (int a = 0; a < m_.config().num_accelerators; ++a) {
      if (participants_ >> a & 1) m_.endpoint(a).arrive(id_, switches_, c);
    }
  }
  bool finished() const override {
    for (int a = 0; a < m_.config().num_accelerators; ++a) {
      if ((destinations_ >> a & 1) && !resumed.count(a)) return false;
    }
    return arrived_;
  }
  Cycle next_wake(Cycle now) const override { return arrived_ ? kNever : now; }

  void on_packet(Endpoint& ep, int, const Packet& p, Cycle c) override {
    const int a = ep.index();
    if (p.h.kind == PacketKind::WriteReq || p.h.kind == PacketKind::ScaleData) {
      last_write[a] = std::max(last_write[a], c);
      data_hops = std::max<int>(data_hops, p.path_hops);
    }
    if (p.h.kind == PacketKind::FlagWrite) {
      if (!first_flag.count(a)) first_flag[a] = c;
      sync_hops = std::max<int>(sync_hops, p.path_hops);
    }
  }
  void on_resume(Endpoint& ep, std::uint32_t id, Cycle c) override {
    if (id == id_) resumed[ep.index()] = c;
  }

  std::map<int, Cycle> resumed, last_write, first_flag;
  int data_hops = 0, sync_hops = 0;

 private:
  Machine& m_;
  std::uint32_t id_;
  std::uint64_t participants_, destinations_;
  std::vector<int> switches_;
  bool arrived_ = false;
};

SimConfig small_cfg() {
  SimConfig c;  // eight accelerators, four switches
  c.validate();
  return c;
}

void fill_fp16(Machine& m, int a, std::size_t elements, float value) {
  auto& reg = m.endpoint(a).memory().add_region("data", kDataBase, elements * 2);
  const std::uint16_t h = float_to_half(value);
  for (std::size_t i = 0; i < elements; ++i) std::memcpy(reg.bytes.data() + 2 * i, &h, 2);
}

float read_fp16(Machine& m, int a, std::size_t i) {
  std::uint16_t h;
  std::memcpy(&h, m.endpoint(a).memory().at(kDataBase + 2 * i, 2), 2);
  return half_to_float(h);
}

IsaInstruction reduce(const SimConfig& cfg, std::uint64_t length, std::uint64_t src, std::uint64_t dst) {
  IsaInstruction ins;
  ins.id = 1;
  ins.length = length;
  ins.addresses.assign(cfg.num_accelerators, kDataBase);
  ins.source_mask = src;
  ins.destination_mask = dst;
  return ins;
}

struct Outcome {
  std::uint64_t reads = 0, writes = 0, flags = 0;
  std::map<int, Cycle> resumed, last_write, first_flag;
  int data_hops = 0, sync_hops = 0;
  std::vector<InstructionTiming> timings;
};

Outcome run_one(const SimConfig& cfg, const IsaInstruction& ins, float value,
                std::function<void(const Machine&, Cycle)> observer = {}) {
  Machine m(cfg, 1);
  const std::size_t elements = ins.length / 2;
  for (int a = 0; a < cfg.num_accelerators; ++a) fill_fp16(m, a, elements, value);
  for (int s = 0; s < cfg.num_switches; ++s) m.isa(s).load({ins});
  ProbeDriver d(m, ins.id, ins.participants(), ins.destination_mask,
                participating_switches(ins.length, cfg.wave_size, cfg.num_switches));
  m.set_driver(&d);
  if (observer) m.set_observer(observer);
  m.run();

  Outcome o;
  for (int s = 0; s < cfg.num_switches; ++s) {
    o.reads += m.isa(s).stats().read_requests;
    o.writes += m.isa(s).stats().write_requests;
    o.flags += m.isa(s).stats().flag_writes;
    for (const auto& t : m.isa(s).timings()) o.timings.push_back(t);
  }
  for (int a = 0; a < cfg.num_accelerators; ++a) {
    // Accelerators only arrive and poll.
    EXPECT_EQ(m.endpoint(a).originated(PacketKind::ReadReq), 0u) << "acc " << a;
    EXPECT_EQ(m.endpoint(a).originated(PacketKind::WriteReq), 0u) << "acc " << a;
    if (ins.destination_mask >> a & 1) {
      for (std::size_t i = 0; i < elements; i += 97) {
        EXPECT_EQ(read_fp16(m, a, i), value * std::popcount(ins.source_mask)) << "acc " << a << " elem " << i;
      }
    } else if (ins.source_mask >> a & 1) {
      EXPECT_EQ(read_fp16(m, a, 0), value) << "non-destination source was overwritten";
    }
  }
  o.resumed = d.resumed;
  o.last_write = d.last_write;
  o.first_flag = d.first_flag;
  o.data_hops = d.data_hops;
  o.sync_hops = d.sync_hops;
  return o;
}

TEST(Isa, FourKilobytesFromEightSourcesIs256Reads) {
  const SimConfig cfg = small_cfg();
  const Outcome o = run_one(cfg, reduce(cfg, 4096, 0xFF, 0xFF), 1.0f);
  EXPECT_EQ(o.reads, 8u * 4096 / 128);
  EXPECT_EQ(o.writes, 8u * 4096 / 128);
  EXPECT_EQ(o.flags, 8u);  // one wave, so a single switch participates
  EXPECT_EQ(o.resumed.size(), 8u);
}

TEST(Isa, AllOnesSumToParticipantCount) {
  const SimConfig cfg = small_cfg();
  run_one(cfg, reduce(cfg, 64 * 1024, 0xFF, 0xFF), 1.0f);  // values checked in run_one
}

TEST(Isa, WavesSpreadOverSwitches) {
  const SimConfig cfg = small_cfg();
  const Outcome o = run_one(cfg, reduce(cfg, 6 * 4096, 0xFF, 0xFF), 0.5f);
  // Waves 0..5 go to switches 0,1,2,3,0,1; every switch flags every destination.
  EXPECT_EQ(o.flags, 4u * 8);
  EXPECT_EQ(waves_for_switch(6 * 4096, 4096, 1, 4), (std::vector<std::uint64_t>{1, 5}));
  EXPECT_EQ(participating_switches(2 * 4096, 4096, 4), (std::vector<int>{0, 1}));
}

TEST(Isa, ExcludedDestinationNeverResumes) {
  const SimConfig cfg = small_cfg();
  const std::uint64_t dst = 0xFF & ~(1u << 3);
  const Outcome o = run_one(cfg, reduce(cfg, 8192, 0xFF, dst), 2.0f);
  EXPECT_EQ(o.resumed.size(), 7u);
  EXPECT_FALSE(o.resumed.count(3));
  EXPECT_FALSE(o.last_write.count(3));
  EXPECT_EQ(o.reads, 8u * 8192 / 128);
  EXPECT_EQ(o.writes, 7u * 8192 / 128);
}

TEST(Isa, SourceSubsetWritesToLargerDestinationSet) {
  const SimConfig cfg = small_cfg();
  const Outcome o = run_one(cfg, reduce(cfg, 4096, 0x0F, 0xFF), 1.5f);
  EXPECT_EQ(o.reads, 4u * 32);
  EXPECT_EQ(o.writes, 8u * 32);
}

TEST(Isa, FlagsFollowTheLastWriteResponse) {
  const SimConfig cfg = small_cfg();
  const Outcome o = run_one(cfg, reduce(cfg, 32 * 1024, 0xFF, 0xFF), 1.0f);
  for (const auto& t : o.timings) {
    if (!t.participated) continue;
    EXPECT_GE(t.flags_sent, t.last_write_resp);
    EXPECT_GT(t.last_write_resp, t.barrier_done);
  }
  for (const auto& [a, c] : o.first_flag) EXPECT_GT(c, o.last_write.at(a)) << "acc " << a;
}

TEST(Isa, SyncIsOneHopAndDataTwo) {
  const SimConfig cfg = small_cfg();
  const Outcome o = run_one(cfg, reduce(cfg, 4096, 0xFF, 0xFF), 1.0f);
  EXPECT_EQ(o.sync_hops, 1);
  EXPECT_EQ(o.data_hops, 2);
}

TEST(Isa, WaveTableNeverOverflows) {
  SimConfig cfg = small_cfg();
  cfg.wave_size = 1024;
  cfg.waves_per_table = 4;
  cfg.table_capacity = 4096;
  cfg.validate();
  std::size_t peak = 0;
  const Outcome o = run_one(cfg, reduce(cfg, 64 * 1024, 0xFF, 0xFF), 1.0f, [&](const Machine& m, Cycle) {
    for (int s = 0; s < m.config().num_switches; ++s) {
      peak = std::max(peak, m.isa(s).entries_in_use());
      ASSERT_LE(m.isa(s).entries_in_use(), 4u);
    }
  });
  EXPECT_EQ(peak, 4u);  // the sliding window does fill up
  (void)o;
}

TEST(Isa, StatsRespectTableCapacity) {
  const SimConfig cfg = small_cfg();
  Machine m(cfg, 3);
  const auto ins = reduce(cfg, 256 * 1024, 0xFF, 0xFF);
  for (int a = 0; a < 8; ++a) fill_fp16(m, a, ins.length / 2, 0.25f);
  for (int s = 0; s < 4; ++s) m.isa(s).load({ins});
  ProbeDriver d(m, 1, 0xFF, 0xFF, {0, 1, 2, 3});
  m.set_driver(&d);
  m.run();
  for (int s = 0; s < 4; ++s) {
    EXPECT_LE(m.isa(s).stats().peak_entries, cfg.waves_per_table);
    EXPECT_LE(m.isa(s).stats().peak_buffered_bytes, cfg.table_capacity);
    EXPECT_EQ(m.isa(s).stats().waves_reduced, 256u / 4 / 4);
    EXPECT_EQ(m.isa(s).stats().max_atomic_hops, 1);
  }
}

TEST(Isa, QuantizedRunSendsOneScalePacketPerWavePerSource) {
  const SimConfig cfg = small_cfg();
  CollectiveSpec spec;
  spec.algorithm = Algorithm::ScinInq;
  spec.message_size = 64 * 1024;  // 32768 fp16 values -> 32 KiB of codes
  spec.include_sync = true;
  RunDetails det;
  RunOptions opts;
  opts.details = &det;
  const RunReport r = run_collective(cfg, spec, opts);
  EXPECT_TRUE(r.correct) << r.failure;
  const std::uint64_t waves = 32 * 1024 / cfg.wave_size;
  std::uint64_t scale_packets = 0, reads = 0, writes = 0;
  for (const auto& s : det.isa_stats) {
    scale_packets += s.scale_packets;
    reads += s.read_requests;
    writes += s.write_requests;
  }
  const std::uint64_t code_packets = cfg.wave_size / cfg.max_payload;
  // Per wave: each source is read for its codes plus one scale read, and each
  // destination gets its codes plus one ScaleData packet.
  EXPECT_EQ(scale_packets, 8 * waves);
  EXPECT_EQ(reads, 8 * waves * (code_packets + 1));
  EXPECT_EQ(writes, 8 * waves * code_packets);
}

TEST(IsaProgram, RejectsMalformedInstructions) {
  const SimConfig cfg = small_cfg();
  auto bad = [&](std::vector<IsaInstruction> p, const char* needle) {
    try {
      validate_program(p, cfg);
      ADD_FAILURE() << "accepted: " << needle;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  auto ok = reduce(cfg, 4096, 0xFF, 0xFF);
  EXPECT_NO_THROW(validate_program({ok}, cfg));

  auto x = ok;
  x.source_mask = 0;
  bad({x}, "source mask");
  x = ok;
  x.destination_mask = 1u << 9;
  bad({x}, "nonexistent");
  x = ok;
  x.addresses.pop_back();
  bad({x}, "one address per accelerator");
  x = ok;
  x.length = 4095;
  bad({x}, "whole number");
  x = ok;
  x.dtype = ElementType::Fp32;
  bad({x}, "element type");
  x = ok;
  x.addresses[2] = kAddressMask;
  bad({x}, "48 bits");
  bad({ok, ok}, "duplicate");
  x = ok;
  x.quant_enable = true;
  x.dtype = ElementType::Int8;
  bad({x}, "scale-address");
  auto scale = scin_program(cfg, 1, 4096, 0xFF, true)[1];
  bad({ok, scale}, "preceding quantized");
  EXPECT_NO_THROW(validate_program(scin_program(cfg, 1, 4096, 0xFF, true), cfg));
  x.length = 100;
  bad({x, scale}, "quantization block");
}

TEST(IsaProgram, TwoInstructionsRunBackToBack) {
  const SimConfig cfg = small_cfg();
  Machine m(cfg, 1);
  for (int a = 0; a < 8; ++a) {
    fill_fp16(m, a, 2048, 1.0f);
    auto& reg = m.endpoint(a).memory().add_region("second", kDataBase + 0x100000, 4096);
    const std::uint16_t h = float_to_half(3.0f);
    for (std::size_t i = 0; i < 2048; ++i) std::memcpy(reg.bytes.data() + 2 * i, &h, 2);
  }
  auto first = reduce(cfg, 4096, 0xFF, 0xFF);
  auto second = reduce(cfg, 4096, 0xFF, 0xFF);
  second.id = 2;
  second.addresses.assign(8, kDataBase + 0x100000);
  for (int s = 0; s < 4; ++s) m.isa(s).load({first, second});

  // Driver arrives for instruction 1, then for instruction 2 after resuming.
  struct Two : Driver, EndpointListener {
    Machine& m;
    int stage = 0;
    std::map<int, int> done;
    explicit Two(Machine& mm) : m(mm) {
      for (int a = 0; a < 8; ++a) m.endpoint(a).set_listener(this);
    }
    void tick(Cycle c) override {
      if (stage == 0) {
        for (int a = 0; a < 8; ++a) m.endpoint(a).arrive(1, {0}, c);
        stage = 1;
      }
    }
    bool finished() const override { return done.size() == 8 && std::all_of(done.begin(), done.end(), [](auto& kv) { return kv.second == 2; }); }
    Cycle next_wake(Cycle now) const override { return stage == 0 ? now : kNever; }
    void on_packet(Endpoint&, int, const Packet&, Cycle) override {}
    void on_resume(Endpoint& ep, std::uint32_t id, Cycle c) override {
      done[ep.index()] = static_cast<int>(id);
      if (id == 1) ep.arrive(2, {0}, c);
    }
  } d(m);
  m.set_driver(&d);
  m.run();
  for (int a = 0; a < 8; ++a) {
    EXPECT_EQ(read_fp16(m, a, 5), 8.0f);
    std::uint16_t h;
    std::memcpy(&h, m.endpoint(a).memory().at(kDataBase + 0x100000 + 10, 2), 2);
    EXPECT_EQ(half_to_float(h), 24.0f);
  }
}

}  // namespace
}  // namespace scinsim
