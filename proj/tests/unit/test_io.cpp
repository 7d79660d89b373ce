// Copyright 2026 The scinsim Authors
// SPDX-License-Identifier: Apache-2.0

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "scinsim/collectives.hpp"
#include "scinsim/endpoint.hpp"
#include "scinsim/half.hpp"
#include "scinsim/io.hpp"

namespace scinsim {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("scinsim_test_io_" + std::to_string(::getpid())) / name;
  fs::create_directories(p.parent_path());
  return p;
}

TEST(Tensor, RoundTripsEveryDtype) {
  const std::vector<float> v{0.5f, -1.25f, 3.0f, 1000.0f, -0.0f, 7.0f};
  for (ElementType t : {ElementType::Fp16, ElementType::Fp32, ElementType::Int8}) {
    const auto path = scratch(std::string("t_") + to_string(t) + ".json");
    const auto in = TensorFile::from_floats(t == ElementType::Int8 ? std::vector<float>{1, -2, 3, 127, -127, 0} : v,
                                            t, kDataBase, {2, 3});
    write_tensor(path, in);
    const auto out = read_tensor(path);
    EXPECT_EQ(out.dtype, t);
    EXPECT_EQ(out.shape, (std::vector<std::size_t>{2, 3}));
    EXPECT_EQ(out.base_address, kDataBase);
    EXPECT_EQ(out.bytes, in.bytes);
    EXPECT_EQ(out.to_floats(), in.to_floats());
    EXPECT_TRUE(fs::exists(path.parent_path() / (path.stem().string() + ".bin")));
  }
}

TEST(Tensor, Fp16StorageRounds) {
  const auto t = TensorFile::from_floats({0.1f}, ElementType::Fp16, 0);
  EXPECT_EQ(t.bytes.size(), 2u);
  EXPECT_EQ(t.to_floats()[0], round_to_half(0.1f));
}

TEST(Tensor, ShapeMustMatchData) {
  const auto path = scratch("bad.json");
  write_tensor(path, TensorFile::from_floats({1, 2, 3, 4}, ElementType::Fp32, 0, {4}));
  auto j = nlohmann::json::parse(read_text(path));
  j["shape"] = {5};
  write_text(path, j.dump());
  EXPECT_THROW(read_tensor(path), ConfigError);
}

TEST(Program, ParsesListAndObjectForms) {
  const SimConfig cfg;
  const std::string one = R"({"id": 3, "length": 4096, "address": 268435456,
                              "source_mask": 255, "destination_mask": [0, 1, 2, 3, 4, 5, 6, 7]})";
  const auto a = parse_program("[" + one + "]", cfg);
  const auto b = parse_program(R"({"instructions": [)" + one + "]}", cfg);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].id, 3u);
  EXPECT_EQ(a[0].length, 4096u);
  EXPECT_EQ(a[0].addresses, std::vector<std::uint64_t>(8, kDataBase));
  EXPECT_EQ(a[0].source_mask, 0xFFu);
  EXPECT_EQ(a[0].destination_mask, 0xFFu);
  EXPECT_EQ(b[0].destination_mask, a[0].destination_mask);
}

TEST(Program, JsonRoundTrip) {
  const SimConfig cfg;
  const auto prog = scin_program(cfg, 9, 8192, 0x0F, true);
  const auto back = parse_program(program_to_json(prog), cfg);
  ASSERT_EQ(back.size(), prog.size());
  for (std::size_t i = 0; i < prog.size(); ++i) {
    EXPECT_EQ(back[i].id, prog[i].id);
    EXPECT_EQ(back[i].length, prog[i].length);
    EXPECT_EQ(back[i].addresses, prog[i].addresses);
    EXPECT_EQ(back[i].source_mask, prog[i].source_mask);
    EXPECT_EQ(back[i].destination_mask, prog[i].destination_mask);
    EXPECT_EQ(back[i].quant_enable, prog[i].quant_enable);
    EXPECT_EQ(back[i].is_scale_load, prog[i].is_scale_load);
    EXPECT_EQ(back[i].dtype, prog[i].dtype);
  }
}

TEST(Program, MalformedProgramsAreConfigErrors) {
  const SimConfig cfg;
  EXPECT_THROW(parse_program("{", cfg), ConfigError);
  EXPECT_THROW(parse_program(R"([{"id": 1}])", cfg), ConfigError);
  EXPECT_THROW(parse_program("[7]", cfg), ConfigError);
  EXPECT_THROW(parse_program(R"([{"id": 1, "length": 4096, "address": "0x10"}])", cfg), ConfigError);
  EXPECT_THROW(parse_program(R"([{"id": 1, "length": 4096, "address": 0, "source_mask": 0, "destination_mask": 1}])",
                             cfg),
               ConfigError);
}

TEST(Specs, AcceptsEveryForm) {
  EXPECT_TRUE(parse_specs("[]").empty());
  const auto one = parse_specs(R"({"algorithm": "ring", "message_size": "16KB", "include_sync": false})");
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].spec.algorithm, Algorithm::Ring);
  EXPECT_EQ(one[0].spec.message_size, 16384u);
  EXPECT_FALSE(one[0].spec.include_sync);

  const auto listed = parse_specs(R"({"specs": [{"algorithm": "scin", "message_size": 4096,
                                                "participants": [0, 2, 5], "arrivals_ns": [0, 12.5]}]})");
  ASSERT_EQ(listed.size(), 1u);
  EXPECT_EQ(listed[0].spec.participants, 0b100101u);
  ASSERT_EQ(listed[0].spec.arrivals.size(), 2u);
  EXPECT_EQ(listed[0].spec.arrivals[1].count(), 12500);

  const auto sweep = parse_specs(R"({"sweep": {"algorithms": ["scin", "ring"], "sizes": ["4KB", "1MB", 128],
                                              "seed": 9}})");
  ASSERT_EQ(sweep.size(), 6u);
  for (const auto& e : sweep) EXPECT_EQ(e.spec.seed, 9u);
}

TEST(Specs, InputPathsResolveAgainstTheSpecFile) {
  const auto specs = parse_specs(R"([{"algorithm": "scin", "message_size": 256, "participants": 3,
                                      "inputs": ["a.json", "/abs/b.json"]}])",
                                 "/data/run");
  ASSERT_EQ(specs[0].input_files.size(), 2u);
  EXPECT_EQ(specs[0].input_files[0], fs::path("/data/run/a.json"));
  EXPECT_EQ(specs[0].input_files[1], fs::path("/abs/b.json"));
}

TEST(Specs, MalformedSpecsAreConfigErrors) {
  EXPECT_THROW(parse_specs(R"({"algorithm": "tree", "message_size": 4096})"), ConfigError);
  EXPECT_THROW(parse_specs(R"({"algorithm": "scin", "message_size": "lots"})"), ConfigError);
  EXPECT_THROW(parse_specs(R"({"algorithm": "scin", "message_size": 4096, "colour": "red"})"), ConfigError);
  EXPECT_THROW(parse_specs(R"({"algorithm": "scin", "message_size": 4096, "pattern": "noise"})"), ConfigError);
  EXPECT_THROW(parse_specs("[1, 2]"), ConfigError);
}

RunReport sample_report() {
  RunReport r;
  r.algorithm = "scin";
  r.message_size = 4096;
  r.num_participants = 8;
  r.seed = 3;
  r.total_cycles = 1800;
  r.total_time = Picoseconds(1'800'000);
  r.payload_bytes_moved = 4096;
  r.achieved_bandwidth = 2.2755e9;
  r.sync_overhead = Picoseconds(700'000);
  r.data_time = Picoseconds(1'100'000);
  r.per_phase_breakdown = {{"barrier", Picoseconds(350'000)}, {"data", Picoseconds(1'100'000)},
                           {"signal", Picoseconds(350'000)}};
  r.correctness_digest = 0xDEADBEEF;
  return r;
}

TEST(Reports, CsvHasHeaderAndOneRowPerRun) {
  const auto csv = reports_to_csv({sample_report(), sample_report()});
  EXPECT_EQ(csv.rfind(report_csv_header(), 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  const auto row = report_csv_row(sample_report());
  EXPECT_NE(row.find("barrier=350.000;data=1100.000;signal=350.000"), std::string::npos) << row;
  EXPECT_NE(row.find("00000000deadbeef"), std::string::npos) << row;
  EXPECT_EQ(reports_to_csv({}), report_csv_header());
}

TEST(Reports, JsonCarriesExactTimes) {
  const auto j = nlohmann::json::parse(reports_to_json({sample_report()}));
  ASSERT_EQ(j.size(), 1u);
  EXPECT_EQ(j[0]["total_time_ps"], 1'800'000);
  EXPECT_EQ(j[0]["per_phase_breakdown"].size(), 3u);
  EXPECT_EQ(j[0]["algorithm"], "scin");
}

TEST(Profiles, CsvRoundTrip) {
  ComputeProfile p;
  p.set({Stage::Prefill, 2, 512, 8, "fp16"}, 1234.5);
  p.set({Stage::Decode, 2, 512, 8, "fp8"}, 99.25);
  const auto back = parse_profile_csv(profile_to_csv(p));
  EXPECT_EQ(back.entries(), p.entries());
}

TEST(Profiles, MalformedCsv) {
  EXPECT_THROW(parse_profile_csv("stage,batch\nprefill,1\n"), ConfigError);
  EXPECT_THROW(parse_profile_csv("stage,batch,seq_len,tp,precision,compute_ns\nwarmup,1,2,8,fp16,3\n"), ConfigError);
  EXPECT_THROW(parse_profile_csv("stage,batch,seq_len,tp,precision,compute_ns\nprefill,x,2,8,fp16,3\n"), ConfigError);
  // Comments and blank lines are skipped.
  EXPECT_EQ(parse_profile_csv("# made up\nstage,batch,seq_len,tp,precision,compute_ns\n\nprefill,1,2,8,fp16,3\n")
                .entries()
                .size(),
            1u);
}

TEST(Latency, CsvRoundTrip) {
  std::map<std::string, LatencyTable> t;
  t["ring"] = LatencyTable({{8192, 22442.0}, {1 << 20, 26992.0}});
  t["scin"] = LatencyTable({{8192, 1800.0}});
  const auto back = parse_latency_csv(latency_to_csv(t));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.at("ring").points(), t["ring"].points());
  EXPECT_EQ(back.at("scin").points(), t["scin"].points());
  EXPECT_THROW(parse_latency_csv("algorithm,message_size,latency_ns\nring,big,1\n"), ConfigError);
}

TEST(Text, WriteCreatesDirectories) {
  const auto p = scratch("nested/deeper/x.txt");
  write_text(p, "hello\n");
  EXPECT_EQ(read_text(p), "hello\n");
  EXPECT_THROW(read_text(scratch("missing.txt")), ConfigError);
}

}  // namespace
}  // namespace scinsim
