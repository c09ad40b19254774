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
#include "dfsmn/network.h"

#include <gtest/gtest.h>

#include <sstream>
#include <thread>

#include "dfsmn/model_io.h"
#include "test_util.h"

namespace dfsmn {
namespace {

using testing::random_matrix;

// Small bidirectional network shaped like preset A (3+2) with scaled dims.
NetworkConfig tiny_config(Precision precision = Precision::kFloat64) {
  ShorthandOptions opt;
  opt.input_dim = 8;
  opt.hidden = 8;
  opt.proj = 4;
  opt.fc_hidden = 8;
  auto cfg = expand_shorthand("3+2", "2,1,2,1", opt);
  cfg.output_streams = {{"mcep", 5, Activation::kLinear},
                        {"lf0", 3, Activation::kLinear},
                        {"uv", 1, Activation::kSigmoid}};
  cfg.precision = precision;
  return cfg;
}

// Randomizes every tensor, including biases and memory taps.
void randomize(NetworkParams<double>& p, const NetworkConfig& cfg, std::uint64_t seed) {
  auto tensors = param_tensors(p, cfg);
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    auto& t = *tensors[i].tensor;
    t = random_matrix(seed + i, t.rows(), t.cols(), 0.4);
  }
}

TEST(CountParams, SingleFcLayer) {
  NetworkConfig cfg;
  cfg.input_dim = 2;
  cfg.layers = {FcLayerSpec{3, Activation::kLinear}};
  cfg.output_streams = {{"y", 1, Activation::kLinear}};
  // fc 2x3 + 3, head 3x1 + 1
  EXPECT_EQ(count_params(cfg), 9u + 4u);
}

TEST(CountParams, PresetA) { EXPECT_EQ(count_params(preset_config("A")), 14187595u); }

TEST(CountParams, PresetE) {
  const auto n = count_params(preset_config("E"));
  EXPECT_EQ(n, 20546635u);
  EXPECT_NEAR(static_cast<double>(n) / 1e6, 20.55, 0.01);
}

TEST(CountParams, ClosedFormByHand) {
  // dfsmn: d_in*proj + proj + (N1+1+N2)*proj + proj*hidden + hidden
  const auto cfg = tiny_config();
  const std::uint64_t first = 8 * 4 + 4 + (2 + 1 + 1) * 4 + 4 * 8 + 8;
  const std::uint64_t other = first;
  const std::uint64_t fc = 8 * 8 + 8;
  const std::uint64_t heads = (8 * 5 + 5) + (8 * 3 + 3) + (8 * 1 + 1);
  EXPECT_EQ(count_params(cfg), first + 2 * other + 2 * fc + heads);
}

TEST(BuildNetwork, CountMatchesAllocation) {
  for (const auto& cfg : {tiny_config(), preset_config("A")}) {
    const auto p = build_network<float>(cfg, 1);
    EXPECT_EQ(allocated_scalars(p), count_params(cfg));
  }
}

TEST(BuildNetwork, DeterministicAndInitPolicy) {
  const auto cfg = tiny_config();
  const auto a = build_network<double>(cfg, 7);
  EXPECT_EQ(a, build_network<double>(cfg, 7));
  EXPECT_NE(a, build_network<double>(cfg, 8));
  for (const auto& t : param_tensors(a, cfg)) {
    const std::string cls = t.param_class;
    const bool zero = cls == "a" || cls == "c" || cls == "b" || cls == "d" || cls == "fc.b" ||
                      cls == "head.b";
    if (!zero) continue;
    for (double v : t.tensor->values()) ASSERT_EQ(v, 0.0) << t.name;
  }
}

TEST(BuildNetwork, WeightScaleFollowsFanIn) {
  NetworkConfig cfg;
  cfg.input_dim = 400;
  cfg.layers = {FcLayerSpec{400, Activation::kRelu}};
  cfg.output_streams = {{"y", 1, Activation::kLinear}};
  const auto p = build_network<double>(cfg, 3);
  const auto& W = std::get<FcLayerParams<double>>(p.layers[0]).W;
  double ss = 0.0;
  for (double v : W.values()) ss += v * v;
  EXPECT_NEAR(std::sqrt(ss / static_cast<double>(W.size())), 1.0 / std::sqrt(400.0), 0.002);
}

TEST(Forward, ZeroInputGivesHeadBiases) {
  auto cfg = tiny_config();
  auto p = build_network<double>(cfg, 2);
  for (std::size_t s = 0; s < p.heads.size(); ++s) {
    p.heads[s].W.set_zero();
    for (std::size_t k = 0; k < p.heads[s].bias.size(); ++k)
      p.heads[s].bias[k] = 0.1 * static_cast<double>(k + s + 1);
  }
  const auto out = forward(p, cfg, Matrix<double>(1, 8)).outputs;
  EXPECT_DOUBLE_EQ(out.at("mcep")(0, 2), p.heads[0].bias[2]);
  EXPECT_DOUBLE_EQ(out.at("lf0")(0, 1), p.heads[1].bias[1]);
  EXPECT_DOUBLE_EQ(out.at("uv")(0, 0), 1.0 / (1.0 + std::exp(-p.heads[2].bias[0])));
}

TEST(Forward, MatchesLayerByLayerComposition) {
  const auto cfg = tiny_config();
  auto p = build_network<double>(cfg, 3);
  randomize(p, cfg, 100);
  const auto x = random_matrix(5, 11, 8);
  const auto out = forward(p, cfg, x).outputs;

  Matrix<double> h = x, prev_ptilde;
  bool have_prev = false;
  for (std::size_t l = 0; l < cfg.layers.size(); ++l) {
    if (const auto* spec = std::get_if<DfsmnLayerSpec>(&cfg.layers[l])) {
      const auto& w = std::get<DfsmnLayerParams<double>>(p.layers[l]);
      const auto pr = project(h, w.V, w.b);
      const auto* skip = spec->memory.skip && have_prev ? &prev_ptilde : nullptr;
      const auto pt = memory_block(pr, w.A, w.C, spec->memory, skip);
      h = layer_output(pt, w.U, w.d, spec->activation);
      prev_ptilde = pt;
      have_prev = true;
    } else {
      const auto& spec_fc = std::get<FcLayerSpec>(cfg.layers[l]);
      const auto& w = std::get<FcLayerParams<double>>(p.layers[l]);
      h = layer_output(h, w.W, w.bias, spec_fc.activation);
      have_prev = false;
    }
  }
  for (std::size_t s = 0; s < cfg.output_streams.size(); ++s) {
    const auto& st = cfg.output_streams[s];
    const auto expect = layer_output(h, p.heads[s].W, p.heads[s].bias, st.activation);
    EXPECT_LT(testing::max_abs_diff(out.at(st.name), expect), 1e-12) << st.name;
  }
}

TEST(Forward, RejectsWrongInputDim) {
  const auto cfg = tiny_config();
  const auto p = build_network<double>(cfg, 1);
  EXPECT_THROW(forward(p, cfg, Matrix<double>(4, 7)), ShapeError);
}

TEST(Forward, CausalNetworkIgnoresFuture) {
  ShorthandOptions opt;
  opt.input_dim = 3;
  opt.hidden = 6;
  opt.proj = 4;
  opt.fc_hidden = 5;
  auto cfg = expand_shorthand("3+1", "2,0,2,1", opt);
  cfg.output_streams = {{"y", 2, Activation::kLinear}};
  cfg.precision = Precision::kFloat64;
  auto p = build_network<double>(cfg, 4);
  randomize(p, cfg, 200);
  const auto x = random_matrix(9, 16, 3);
  const auto base = forward(p, cfg, x).outputs.at("y");
  for (std::size_t t = 0; t < 15; ++t) {
    auto x2 = x;
    for (std::size_t u = t + 1; u < 16; ++u) x2(u, 1) += 5.0;
    const auto y = forward(p, cfg, x2).outputs.at("y");
    for (std::size_t r = 0; r <= t; ++r)
      for (std::size_t k = 0; k < 2; ++k) ASSERT_EQ(y(r, k), base(r, k));
  }
}

TEST(Forward, ThreadSafeOnSharedParams) {
  const auto cfg = tiny_config();
  auto p = build_network<double>(cfg, 5);
  randomize(p, cfg, 300);
  std::vector<Matrix<double>> inputs;
  std::vector<StreamMap<double>> serial;
  for (int i = 0; i < 8; ++i) {
    inputs.push_back(random_matrix(400 + i, 10 + i, 8));
    serial.push_back(forward(p, cfg, inputs.back()).outputs);
  }
  std::vector<StreamMap<double>> parallel(inputs.size());
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    threads.emplace_back([&, i] { parallel[i] = forward(p, cfg, inputs[i]).outputs; });
  for (auto& t : threads) t.join();
  for (std::size_t i = 0; i < inputs.size(); ++i) EXPECT_EQ(parallel[i], serial[i]);
}

StreamMap<double> random_stream_grads(const NetworkConfig& cfg, std::size_t T, std::uint64_t seed) {
  StreamMap<double> g;
  for (const auto& s : cfg.output_streams)
    g.emplace(s.name, random_matrix(seed++, T, static_cast<std::size_t>(s.dim)));
  return g;
}

TEST(Backward, ZeroStreamGradsGiveZero) {
  const auto cfg = tiny_config();
  auto p = build_network<double>(cfg, 6);
  randomize(p, cfg, 500);
  const auto x = random_matrix(10, 7, 8);
  const auto fwd = forward(p, cfg, x);
  StreamMap<double> g;
  for (const auto& s : cfg.output_streams) g.emplace(s.name, Matrix<double>(7, s.dim));
  const auto grads = backward(p, cfg, fwd.cache, g);
  EXPECT_EQ(grads.params, zero_params<double>(cfg));
  for (double v : grads.input.values()) EXPECT_EQ(v, 0.0);
}

TEST(Backward, MissingStreamRejected) {
  const auto cfg = tiny_config();
  const auto p = build_network<double>(cfg, 6);
  const auto fwd = forward(p, cfg, random_matrix(1, 4, 8));
  auto g = random_stream_grads(cfg, 4, 9);
  g.erase("lf0");
  EXPECT_THROW(backward(p, cfg, fwd.cache, g), std::invalid_argument);
}

TEST(Backward, MultiStreamEqualsSumOfSingleStreams) {
  const auto cfg = tiny_config();
  auto p = build_network<double>(cfg, 7);
  randomize(p, cfg, 600);
  const auto x = random_matrix(11, 13, 8);
  const auto fwd = forward(p, cfg, x);
  const auto g = random_stream_grads(cfg, 13, 20);
  const auto full = backward(p, cfg, fwd.cache, g);

  auto sum = zero_params<double>(cfg);
  for (const auto& [name, m] : g) {
    StreamMap<double> only;
    for (const auto& [other, mo] : g)
      only.emplace(other, other == name ? mo : Matrix<double>(mo.rows(), mo.cols()));
    const auto part = backward(p, cfg, fwd.cache, only);
    accumulate(sum, part.params, 1.0, cfg);
  }
  const auto a = param_tensors(full.params, cfg);
  const auto b = param_tensors(sum, cfg);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < a[i].tensor->size(); ++k) {
      const double x1 = (*a[i].tensor)[k], x2 = (*b[i].tensor)[k];
      ASSERT_LE(std::abs(x1 - x2), 1e-10 * std::max(1.0, std::abs(x1))) << a[i].name;
    }
}

TEST(ParamTensors, NamesAndClasses) {
  const auto cfg = tiny_config();
  const auto p = build_network<double>(cfg, 1);
  const auto t = param_tensors(p, cfg);
  ASSERT_EQ(t.size(), 3u * 6u + 2u * 2u + 3u * 2u);
  EXPECT_EQ(t[2].name, "layer0.a");
  EXPECT_STREQ(t[2].param_class, "a");
  EXPECT_EQ(t[3].name, "layer0.c");
  EXPECT_STREQ(t.back().param_class, "head.b");
}

TEST(ModelIo, RoundTripIsByteIdentical) {
  for (auto precision : {Precision::kFloat32, Precision::kFloat64}) {
    const auto cfg = tiny_config(precision);
    std::ostringstream first, second;
    if (precision == Precision::kFloat64) {
      auto p = build_network<double>(cfg, 9);
      randomize(p, cfg, 700);
      save_model(first, cfg, p);
    } else {
      save_model(first, cfg, build_network<float>(cfg, 9));
    }
    std::istringstream in(first.str());
    const auto loaded = load_model(in);
    EXPECT_EQ(loaded.config, cfg);
    std::visit([&](const auto& params) { save_model(second, loaded.config, params); },
               loaded.params);
    EXPECT_EQ(first.str(), second.str());
  }
}

TEST(ModelIo, PresetAReportsParamCount) {
  const auto cfg = preset_config("A");
  std::ostringstream out;
  save_model(out, cfg, build_network<float>(cfg, 0));
  std::istringstream in(out.str());
  const auto loaded = load_model(in);
  const auto n = std::visit([](const auto& p) { return allocated_scalars(p); }, loaded.params);
  EXPECT_EQ(n, 14187595u);
  EXPECT_EQ(count_params(loaded.config), 14187595u);
}

ModelFormatError::Kind load_error_kind(const std::string& bytes) {
  std::istringstream in(bytes);
  try {
    load_model(in);
  } catch (const ModelFormatError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "load_model accepted corrupt input";
  return ModelFormatError::Kind::kIo;
}

TEST(ModelIo, DistinctErrorKinds) {
  const auto cfg = tiny_config(Precision::kFloat32);
  std::ostringstream out;
  save_model(out, cfg, build_network<float>(cfg, 1));
  const auto good = out.str();

  auto bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_EQ(load_error_kind(bad_magic), ModelFormatError::Kind::kBadMagic);

  auto bad_version = good;
  bad_version[4] = 7;
  EXPECT_EQ(load_error_kind(bad_version), ModelFormatError::Kind::kVersionMismatch);

  EXPECT_EQ(load_error_kind(good.substr(0, good.size() - 3)), ModelFormatError::Kind::kTruncated);
  EXPECT_EQ(load_error_kind(good.substr(0, 10)), ModelFormatError::Kind::kTruncated);
}

TEST(ModelIo, PrecisionMismatchRejected) {
  const auto cfg = tiny_config(Precision::kFloat64);
  std::ostringstream out;
  EXPECT_THROW(save_model(out, cfg, build_network<float>(cfg, 1)), std::invalid_argument);
}

}  // namespace
}  // namespace dfsmn
