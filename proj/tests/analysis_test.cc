// Copyright (c) 2026 The DFSMN Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include "dfsmn/analysis.h"

#include <gtest/gtest.h>

#include <cmath>

#include "dfsmn/network.h"
#include "json.hpp"
#include "probes.h"

namespace dfsmn {
namespace {

NetworkConfig dfsmn_stack(int depth, const MemoryConfig& m, int hidden = 16, int proj = 8,
                          int fc = 0) {
  NetworkConfig cfg;
  cfg.input_dim = 4;
  for (int i = 0; i < depth; ++i) {
    DfsmnLayerSpec d;
    d.hidden = hidden;
    d.proj = proj;
    d.memory = m;
    cfg.layers.push_back(d);
  }
  if (fc > 0) cfg.layers.push_back(FcLayerSpec{fc, Activation::kRelu});
  cfg.output_streams = {{"y", 2, Activation::kLinear}};
  cfg.precision = Precision::kFloat64;
  return cfg;
}

MemoryConfig mem(int n_back, int n_ahead, int s1, int s2) {
  MemoryConfig m;
  m.n_back = n_back;
  m.n_ahead = n_ahead;
  m.stride_back = s1;
  m.stride_ahead = s2;
  return m;
}

TEST(ReceptiveField, Examples) {
  EXPECT_EQ(receptive_field(preset_config("E")), (ReceptiveField{120, 120}));
  EXPECT_EQ(receptive_field(dfsmn_stack(3, mem(0, 0, 1, 1))), (ReceptiveField{0, 0}));
  EXPECT_EQ(receptive_field(dfsmn_stack(3, mem(2, 0, 2, 1))).back_frames, 12);
  EXPECT_EQ(receptive_field(dfsmn_stack(2, mem(3, 1, 1, 4), 8, 4, 5)), (ReceptiveField{6, 8}));
}

TEST(ReceptiveField, MatchesEmpiricalHorizon) {
  const std::vector<NetworkConfig> cfgs{dfsmn_stack(2, mem(2, 1, 2, 3), 6, 3, 5),
                                        dfsmn_stack(3, mem(1, 2, 1, 1), 5, 3),
                                        dfsmn_stack(1, mem(4, 0, 1, 1), 4, 2, 3)};
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    const auto rf = receptive_field(cfgs[i]);
    const auto p = testing::random_active_network(cfgs[i], 10 + i);
    const auto h = testing::measure_horizon(p, cfgs[i], 20, 50 + i);
    EXPECT_EQ(h.back, rf.back_frames) << "config " << i;
    EXPECT_EQ(h.ahead, rf.ahead_frames) << "config " << i;
  }
}

TEST(Flops, SingleFcExample) {
  NetworkConfig cfg;
  cfg.input_dim = 2;
  cfg.layers = {FcLayerSpec{3, Activation::kLinear}};
  cfg.output_streams = {{"y", 1, Activation::kLinear}};
  // fc: 2*2*3 + 3 + 3 = 18; head 3->1: 2*3*1 + 1 + 1 = 8
  EXPECT_EQ(flops_per_frame(cfg), 18u + 8u);
}

TEST(Flops, DfsmnLayerByHand) {
  auto cfg = dfsmn_stack(1, mem(2, 1, 1, 1), 6, 3);
  // projection 2*4*3 + 3 bias; memory 2*(2+1+1)*3; output 2*3*6 + 6 bias + 6 act
  const std::uint64_t layer = 24 + 3 + 24 + 36 + 6 + 6;
  const std::uint64_t head = 2 * 6 * 2 + 2 + 2;
  EXPECT_EQ(flops_per_frame(cfg), layer + head);
}

TEST(Flops, PresetA) {
  const auto r = cost_report("A", preset_config("A"));
  EXPECT_EQ(r.flops_per_frame, 28373654u);
  EXPECT_NEAR(r.gflops_per_second, 5.67, 0.01);
}

TEST(Flops, StrictlyIncreasingInEachKnob) {
  const auto base = dfsmn_stack(2, mem(2, 2, 1, 1), 8, 4, 6);
  const auto f0 = flops_per_frame(base);
  auto more_back = base;
  std::get<DfsmnLayerSpec>(more_back.layers[0]).memory.n_back = 3;
  auto more_ahead = base;
  std::get<DfsmnLayerSpec>(more_ahead.layers[1]).memory.n_ahead = 3;
  auto deeper = dfsmn_stack(3, mem(2, 2, 1, 1), 8, 4, 6);
  auto wider = base;
  std::get<DfsmnLayerSpec>(wider.layers[0]).hidden = 9;
  auto wider_fc = base;
  std::get<FcLayerSpec>(wider_fc.layers[2]).hidden = 7;
  for (const auto* c : {&more_back, &more_ahead, &deeper, &wider, &wider_fc})
    EXPECT_GT(flops_per_frame(*c), f0);
}

TEST(CostReport, UnitsAndSize) {
  for (const auto& name : preset_names()) {
    const auto cfg = preset_config(name);
    const auto r = cost_report(name, cfg);
    EXPECT_EQ(r.size_mb, static_cast<double>(count_params(cfg)) * 4.0 / 1048576.0);
    EXPECT_EQ(r.look_back_ms, 5.0 * static_cast<double>(r.look_back_frames));
    EXPECT_EQ(r.gflops_per_second, static_cast<double>(r.flops_per_frame) * 200.0 / 1e9);
    ASSERT_TRUE(r.published.has_value());
  }
}

TEST(CostReport, PresetExamples) {
  const auto e = cost_report("E", preset_config("E"));
  EXPECT_EQ(e.look_back_ms, 600.0);
  EXPECT_EQ(e.look_ahead_ms, 600.0);
  const auto a = cost_report("A", preset_config("A"));
  EXPECT_GE(a.size_mb, 49.6);
  EXPECT_LE(a.size_mb, 74.4);
  EXPECT_EQ(a.param_count, 14187595u);
}

TEST(TableReport, OrderingAndFormats) {
  const auto rows = table_report(preset_names());
  ASSERT_EQ(rows.size(), 9u);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_GE(rows[i].size_mb, rows[i - 1].size_mb);
  EXPECT_THROW(table_report({"A", "Z"}), ConfigError);

  const auto text = format_table(rows);
  EXPECT_NE(text.find("published"), std::string::npos);
  EXPECT_NE(text.find("14187595"), std::string::npos);

  const auto records = format_records(rows);
  std::size_t lines = 0, pos = 0;
  while ((pos = records.find('\n', pos)) != std::string::npos) ++lines, ++pos;
  EXPECT_EQ(lines, 9u);
  const auto first = nlohmann::json::parse(records.substr(0, records.find('\n')));
  EXPECT_EQ(first["id"], "A");
  EXPECT_EQ(first["param_count"], 14187595u);
  EXPECT_EQ(first["published_size_mb"], 62.0);
}

TEST(PublishedCosts, ReferenceRows) {
  ASSERT_TRUE(published_cost("BLSTM").has_value());
  EXPECT_EQ(published_cost("E")->size_mb, 87.0);
  EXPECT_EQ(published_cost("I")->gflops, 7.18);
  EXPECT_FALSE(published_cost("Z").has_value());
}

}  // namespace
}  // namespace dfsmn
