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
// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failing criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "dfsmn/analysis.h"
#include "dfsmn/config.h"
#include "dfsmn/dataset.h"
#include "dfsmn/feature_io.h"
#include "dfsmn/grad_check.h"
#include "dfsmn/metrics.h"
#include "dfsmn/model_io.h"
#include "dfsmn/network.h"
#include "dfsmn/trainer.h"
#include "probes.h"

namespace dfsmn {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// 1. Finite-difference gradient check on a four-layer skip-connected stack.
Outcome gradient_correctness() {
  ShorthandOptions opt;
  opt.input_dim = 8;
  opt.proj = 4;
  opt.hidden = 8;
  opt.fc_hidden = 8;
  auto cfg = expand_shorthand("4+0", "3,3,2,2", opt);
  cfg.precision = Precision::kFloat64;
  GradCheckOptions g;
  g.frames = 20;
  g.tolerance = 1e-4;
  const auto r = grad_check(cfg, g);
  bool pass = r.pass;
  std::string detail;
  for (const char* cls : {"V", "b", "a", "c", "U", "d", "head.W", "head.b", "input", "skip"}) {
    const auto it = r.classes.find(cls);
    if (it == r.classes.end() || it->second.checked == 0) {
      pass = false;
      detail += std::string(" missing:") + cls;
    } else if (!(it->second.max_rel_err < 1e-4)) {
      pass = false;
    }
  }
  return {pass, "worst class " + r.worst_class + " rel err " + fmt("%.3g", r.worst_rel_err) +
                    detail};
}

NetworkConfig small_stack(int depth, MemoryConfig m, int hidden, int proj, int input_dim) {
  NetworkConfig cfg;
  cfg.input_dim = input_dim;
  for (int l = 0; l < depth; ++l) {
    DfsmnLayerSpec d;
    d.hidden = hidden;
    d.proj = proj;
    d.memory = m;
    d.memory.skip = l > 0;
    d.activation = Activation::kTanh;
    cfg.layers.emplace_back(d);
  }
  cfg.output_streams = {{"y", 2, Activation::kLinear}};
  cfg.precision = Precision::kFloat64;
  return cfg;
}

// 2. Analytic receptive field for every preset plus an empirical probe.
Outcome receptive_field_check() {
  bool pass = true;
  std::string detail;
  const auto e = receptive_field(preset_config("E"));
  pass &= e.back_frames == 120 && e.ahead_frames == 120;
  const auto e_report = cost_report("E", preset_config("E"));
  pass &= e_report.look_back_ms == 600.0 && e_report.look_ahead_ms == 600.0;
  detail += "E (" + std::to_string(e.back_frames) + ", " + std::to_string(e.ahead_frames) +
            ") frames " + fmt("%.0f", e_report.look_back_ms) + " ms;";
  for (const auto& name : preset_names()) {
    const auto cfg = preset_config(name);
    std::int64_t back = 0, ahead = 0;
    for (const auto& l : cfg.layers) {
      if (const auto* d = std::get_if<DfsmnLayerSpec>(&l)) {
        back += std::int64_t{d->memory.n_back} * d->memory.stride_back;
        ahead += std::int64_t{d->memory.n_ahead} * d->memory.stride_ahead;
      }
    }
    const auto rf = receptive_field(cfg);
    if (rf.back_frames != back || rf.ahead_frames != ahead) {
      pass = false;
      detail += " preset " + name + " mismatch;";
    }
  }
  const std::vector<NetworkConfig> nets{small_stack(2, {2, 1, 2, 3}, 6, 3, 5),
                                        small_stack(3, {1, 2, 1, 1}, 5, 3, 4),
                                        small_stack(1, {4, 0, 1, 1}, 4, 2, 3)};
  for (std::size_t i = 0; i < nets.size(); ++i) {
    const auto rf = receptive_field(nets[i]);
    const auto p = testing::random_active_network(nets[i], 100 + i);
    const auto h = testing::measure_horizon(p, nets[i], 20, 200 + i);
    const bool ok = h.back == rf.back_frames && h.ahead == rf.ahead_frames;
    pass &= ok;
    detail += " net" + std::to_string(i) + " empirical (" + std::to_string(h.back) + ", " +
              std::to_string(h.ahead) + ") analytic (" + std::to_string(rf.back_frames) + ", " +
              std::to_string(rf.ahead_frames) + ")";
  }
  return {pass, detail};
}

std::vector<CostReport> preset_reports() { return table_report(preset_names()); }

// 3. fp32 model sizes against the published size column.
Outcome model_size_check() {
  const auto rows = preset_reports();
  bool pass = true;
  double worst = 0.0, abcd_min = 1e300, abcd_max = 0.0;
  for (const auto& r : rows) {
    const double rel = r.size_mb / r.published->size_mb - 1.0;
    worst = std::max(worst, std::abs(rel));
    pass &= std::abs(rel) <= 0.20;
    if (r.name <= "D") {
      abcd_min = std::min(abcd_min, r.size_mb);
      abcd_max = std::max(abcd_max, r.size_mb);
    }
  }
  for (std::size_t i = 4; i < rows.size(); ++i) {
    const double prev = i == 4 ? abcd_max : rows[i - 1].size_mb;
    pass &= prev <= rows[i].size_mb;
  }
  pass &= abcd_max - abcd_min <= 0.5;
  return {pass, "A " + fmt("%.2f", rows.front().size_mb) + " MB, I " +
                    fmt("%.2f", rows.back().size_mb) + " MB, worst deviation " +
                    fmt("%.1f", 100 * worst) + "%, A-D spread " +
                    fmt("%.3f", abcd_max - abcd_min) + " MB"};
}

// 4. Compute cost against the published FLOPS column.
Outcome flops_check() {
  const auto rows = preset_reports();
  bool pass = true;
  double worst_ratio = 1.0, abcd_min = 1e300, abcd_max = 0.0;
  for (const auto& r : rows) {
    const double ratio = r.gflops_per_second / r.published->gflops;
    worst_ratio = std::max({worst_ratio, ratio, 1.0 / ratio});
    pass &= ratio <= 2.0 && ratio >= 0.5;
    if (r.name <= "D") {
      abcd_min = std::min(abcd_min, r.gflops_per_second);
      abcd_max = std::max(abcd_max, r.gflops_per_second);
    }
  }
  for (std::size_t i = 4; i < rows.size(); ++i) {
    const double prev = i == 4 ? abcd_max : rows[i - 1].gflops_per_second;
    pass &= prev < rows[i].gflops_per_second;
  }
  pass &= abcd_max / abcd_min - 1.0 <= 0.01;
  return {pass, "A " + fmt("%.3f", rows.front().gflops_per_second) + " GFLOPS/s, I " +
                    fmt("%.3f", rows.back().gflops_per_second) + ", worst ratio " +
                    fmt("%.2f", worst_ratio) + ", A-D spread " +
                    fmt("%.4f", 100 * (abcd_max / abcd_min - 1.0)) + "%"};
}

NetworkConfig echo_config(const char* order) {
  return parse_config(std::string(R"({"input_dim": 1, "layers": [{"dfsmn": {"hidden": 32,
      "proj": 16, "order": ")") +
                      order + R"("}}, {"fc": {"hidden": 32}}],
      "output_streams": [{"name": "echo", "dim": 1}]})");
}

double train_echo(const NetworkConfig& cfg, const Dataset& tr, const Dataset& va) {
  TrainConfig tc;
  tc.lr = 0.02;
  tc.batch_frames = 64;
  tc.patience = 5;
  tc.min_improvement = 0.001;
  tc.max_epochs = 200;
  auto r = train(cfg, build_network<float>(cfg, 0), tr, va, tc);
  return r.history.back().valid_mse;
}

// 5. Echo task with lag 8: enough look-back learns it, too little cannot.
Outcome echo_check() {
  SyntheticTaskSpec spec;
  spec.kind = SyntheticTaskSpec::Kind::kEcho;
  spec.lag = 8;
  spec.num_sequences = 64;
  spec.num_valid = 16;
  spec.seq_len = 64;
  const auto [tr, va] = generate_task(spec, 1);
  const auto wide = echo_config("4,0,2,1");
  const auto narrow = echo_config("2,0,1,1");
  const double wide_mse = train_echo(wide, tr, va);
  const double narrow_mse = train_echo(narrow, tr, va);
  const bool pass = receptive_field(wide).back_frames >= 8 &&
                    receptive_field(narrow).back_frames == 2 && wide_mse < 0.05 &&
                    narrow_mse > 0.5;
  return {pass, "look-back 8: valid MSE " + fmt("%.3g", wide_mse) + "; look-back 2: " +
                    fmt("%.3g", narrow_mse)};
}

// 6. A small network memorises a ten-sequence four-stream toy set.
Outcome overfit_check() {
  SyntheticTaskSpec spec;
  spec.kind = SyntheticTaskSpec::Kind::kAcousticToy;
  spec.input_dim = 8;
  spec.num_sequences = 10;
  spec.num_valid = 0;
  spec.seq_len = 32;
  const auto [tr, va] = generate_task(spec, 3);
  const auto cfg = parse_config(R"({"input_dim": 8, "layers": [
      {"dfsmn": {"hidden": 64, "proj": 32, "order": "3,3,1,1", "activation": "linear"}},
      {"fc": {"hidden": 96, "activation": "tanh"}},
      {"fc": {"hidden": 96, "activation": "tanh"}}],
      "output_streams": [{"name": "mcep", "dim": 6}, {"name": "lf0", "dim": 3},
                         {"name": "bap", "dim": 2},
                         {"name": "uv", "dim": 1, "activation": "sigmoid"}]})");
  TrainConfig tc;
  tc.lr = 0.25;
  tc.batch_frames = 32;
  tc.decay_factor = 0.5;
  tc.patience = 25;
  tc.min_improvement = 0.0;
  tc.max_epochs = 500;
  const auto r = train(cfg, build_network<float>(cfg, 0), tr, va, tc);
  const double loss = evaluate_loss(r.params, cfg, tr);
  return {loss < 1e-3 && r.history.size() <= 500,
          "multi-task MSE " + fmt("%.3g", loss) + " after " +
              std::to_string(r.history.size()) + " epochs"};
}

// Brute-force references built from plain nested loops.
Matrix<double> random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
  Matrix<double> m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  return m;
}

double loop_mcd(const Matrix<double>& a, const Matrix<double>& b) {
  double sum = 0;
  for (std::size_t t = 0; t < a.rows(); ++t) {
    double d = 0;
    for (std::size_t i = 1; i < a.cols(); ++i) d += (a(t, i) - b(t, i)) * (a(t, i) - b(t, i));
    sum += 10.0 / std::log(10.0) * std::sqrt(2.0 * d);
  }
  return sum / a.rows();
}

double loop_f0(const Matrix<double>& ref_hz, const Matrix<double>& hyp_lf0,
               const Matrix<double>& ref_uv, const Matrix<double>& hyp_uv) {
  double sum = 0;
  int n = 0;
  for (std::size_t t = 0; t < ref_hz.rows(); ++t) {
    if (ref_uv(t, 0) < 0.5 || hyp_uv(t, 0) < 0.5) continue;
    const double d = std::exp(hyp_lf0(t, 0)) - ref_hz(t, 0);
    sum += d * d;
    ++n;
  }
  return std::sqrt(sum / n);
}

double loop_bapd(const Matrix<double>& a, const Matrix<double>& b) {
  double sum = 0;
  for (std::size_t t = 0; t < a.rows(); ++t) {
    double d = 0;
    for (std::size_t k = 0; k < a.cols(); ++k) d += (a(t, k) - b(t, k)) * (a(t, k) - b(t, k));
    sum += std::sqrt(d / a.cols());
  }
  return sum / a.rows();
}

double loop_uv(const Matrix<double>& ref, const Matrix<double>& hyp) {
  int wrong = 0;
  for (std::size_t t = 0; t < ref.rows(); ++t)
    if ((ref(t, 0) >= 0.5) != (hyp(t, 0) >= 0.5)) ++wrong;
  return static_cast<double>(wrong) / ref.rows();
}

double loop_mse(const std::map<std::string, Matrix<double>>& a,
                const std::map<std::string, Matrix<double>>& b) {
  double sum = 0;
  double n = 0;
  for (const auto& [name, m] : a)
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = 0; j < m.cols(); ++j) {
        const double d = m(i, j) - b.at(name)(i, j);
        sum += d * d;
        n += 1;
      }
  return sum / n;
}

bool close(double got, double want) {
  return std::abs(got - want) <= 1e-10 * std::max(std::abs(want), 1e-300) ||
         (got == 0.0 && want == 0.0);
}

// 7. Objective metrics against loop oracles plus invariants.
Outcome metric_check() {
  Rng rng(2026);
  int mismatches = 0, invariant_failures = 0;
  for (int c = 0; c < 100; ++c) {
    const std::size_t T = 5 + rng.below(40);
    const std::size_t M = 2 + rng.below(24), B = 1 + rng.below(5);
    const auto ref_mcep = random_matrix(rng, T, M, 1.0);
    const auto hyp_mcep = random_matrix(rng, T, M, 1.0);
    const auto ref_bap = random_matrix(rng, T, B, 1.0);
    const auto hyp_bap = random_matrix(rng, T, B, 1.0);
    Matrix<double> ref_uv(T, 1), hyp_uv(T, 1), ref_hz(T, 1), hyp_lf0(T, 1);
    for (std::size_t t = 0; t < T; ++t) {
      ref_uv(t, 0) = rng.uniform() < 0.7 ? 1.0 : 0.0;
      hyp_uv(t, 0) = rng.uniform();
      ref_hz(t, 0) = 80.0 + 200.0 * rng.uniform();
      hyp_lf0(t, 0) = std::log(80.0 + 200.0 * rng.uniform());
    }
    ref_uv(0, 0) = 1.0;
    hyp_uv(0, 0) = 0.9;
    const std::map<std::string, Matrix<double>> ref{{"mcep", ref_mcep}, {"bap", ref_bap}};
    const std::map<std::string, Matrix<double>> hyp{{"mcep", hyp_mcep}, {"bap", hyp_bap}};

    mismatches += !close(mcd(ref_mcep, hyp_mcep), loop_mcd(ref_mcep, hyp_mcep));
    mismatches += !close(f0_rmse(ref_hz, hyp_lf0, ref_uv, hyp_uv),
                         loop_f0(ref_hz, hyp_lf0, ref_uv, hyp_uv));
    mismatches += !close(bapd(ref_bap, hyp_bap), loop_bapd(ref_bap, hyp_bap));
    mismatches += !close(uv_error(ref_uv, hyp_uv), loop_uv(ref_uv, hyp_uv));
    mismatches += !close(total_mse(ref, hyp), loop_mse(ref, hyp));

    // Zero on identical inputs.
    Matrix<double> ref_lf0(T, 1);
    for (std::size_t t = 0; t < T; ++t) ref_lf0(t, 0) = std::log(ref_hz(t, 0));
    invariant_failures += mcd(ref_mcep, ref_mcep) != 0.0;
    invariant_failures += bapd(ref_bap, ref_bap) != 0.0;
    invariant_failures += uv_error(ref_uv, ref_uv) != 0.0;
    invariant_failures += total_mse(ref, ref) != 0.0;
    invariant_failures += f0_rmse(ref_hz, ref_lf0, ref_uv, ref_uv) > 1e-9;

    // Masking: values on frames excluded from F0 scoring do not matter, and
    // MCD ignores the energy coefficient.
    auto hyp_lf0_masked = hyp_lf0;
    for (std::size_t t = 0; t < T; ++t)
      if (ref_uv(t, 0) < 0.5 || hyp_uv(t, 0) < 0.5) hyp_lf0_masked(t, 0) = 40.0 * rng.normal();
    invariant_failures += f0_rmse(ref_hz, hyp_lf0_masked, ref_uv, hyp_uv) !=
                          f0_rmse(ref_hz, hyp_lf0, ref_uv, hyp_uv);
    auto hyp_c0 = hyp_mcep;
    for (std::size_t t = 0; t < T; ++t) hyp_c0(t, 0) += 100.0;
    invariant_failures += mcd(ref_mcep, hyp_c0) != mcd(ref_mcep, hyp_mcep);
  }
  return {mismatches == 0 && invariant_failures == 0,
          "500 oracle comparisons, " + std::to_string(mismatches) + " mismatches; " +
              std::to_string(invariant_failures) + " invariant failures"};
}

template <typename T>
std::string model_bytes(const NetworkConfig& cfg, const NetworkParams<T>& p) {
  std::ostringstream out;
  save_model(out, cfg, p);
  return out.str();
}

// 8. Bit-identical retraining and byte-exact serialization.
Outcome determinism_check() {
  SyntheticTaskSpec spec;
  spec.kind = SyntheticTaskSpec::Kind::kEcho;
  spec.lag = 3;
  spec.num_sequences = 8;
  spec.num_valid = 2;
  spec.seq_len = 32;
  const auto [tr, va] = generate_task(spec, 11);
  const auto cfg = echo_config("4,1,1,1");
  TrainConfig tc;
  tc.lr = 0.02;
  tc.batch_frames = 64;
  tc.max_epochs = 5;
  tc.seed = 5;
  const auto a = train(cfg, build_network<float>(cfg, 5), tr, va, tc);
  const auto b = train(cfg, build_network<float>(cfg, 5), tr, va, tc);
  const auto bytes_a = model_bytes(cfg, a.params);
  const bool same_model = bytes_a == model_bytes(cfg, b.params);

  std::istringstream in(bytes_a);
  const auto loaded = load_model(in);
  const auto& lp = std::get<NetworkParams<float>>(loaded.params);
  const bool model_roundtrip = model_bytes(loaded.config, lp) == bytes_a;

  auto cfg64 = cfg;
  cfg64.precision = Precision::kFloat64;
  const auto p64 = testing::random_active_network(cfg64, 9);
  const auto bytes64 = model_bytes(cfg64, p64);
  std::istringstream in64(bytes64);
  const auto loaded64 = load_model(in64);
  const bool model64_roundtrip =
      model_bytes(loaded64.config, std::get<NetworkParams<double>>(loaded64.params)) == bytes64;

  std::ostringstream feat;
  write_feature_file(feat, "echo", tr.sequences[0].input.cast<float>());
  std::istringstream feat_in(feat.str());
  const auto f = read_feature_file(feat_in);
  std::ostringstream feat_again;
  write_feature_file(feat_again, f.stream, f.data);
  const bool feature_roundtrip = feat_again.str() == feat.str() &&
                                 f.data == tr.sequences[0].input.cast<float>();

  return {same_model && model_roundtrip && model64_roundtrip && feature_roundtrip,
          std::string("retrain identical: ") + (same_model ? "yes" : "no") +
              ", fp32 model round-trip: " + (model_roundtrip ? "yes" : "no") +
              ", fp64 model round-trip: " + (model64_roundtrip ? "yes" : "no") +
              ", feature round-trip: " + (feature_roundtrip ? "yes" : "no")};
}

NetworkConfig random_causal_config(Rng& rng) {
  NetworkConfig cfg;
  cfg.input_dim = 1 + static_cast<int>(rng.below(6));
  const int depth = 1 + static_cast<int>(rng.below(5));
  const int proj = 1 + static_cast<int>(rng.below(6));
  bool last_dfsmn = false;
  for (int l = 0; l < depth; ++l) {
    if (rng.uniform() < 0.7) {
      DfsmnLayerSpec d;
      d.hidden = 2 + static_cast<int>(rng.below(8));
      d.proj = proj;
      d.memory.n_back = static_cast<int>(rng.below(5));
      d.memory.stride_back = 1 + static_cast<int>(rng.below(3));
      d.memory.n_ahead = 0;
      d.memory.skip = last_dfsmn && rng.uniform() < 0.5;
      d.activation = rng.uniform() < 0.5 ? Activation::kRelu : Activation::kTanh;
      cfg.layers.emplace_back(d);
      last_dfsmn = true;
    } else {
      FcLayerSpec f;
      f.hidden = 2 + static_cast<int>(rng.below(8));
      f.activation = Activation::kTanh;
      cfg.layers.emplace_back(f);
      last_dfsmn = false;
    }
  }
  cfg.output_streams = {{"y", 1 + static_cast<int>(rng.below(3)), Activation::kLinear},
                        {"p", 1, Activation::kSigmoid}};
  cfg.precision = Precision::kFloat64;
  return cfg;
}

// 9. Unidirectional networks never look at future input frames.
Outcome causality_check() {
  Rng rng(9);
  int violations = 0, reacted = 0, smooth = 0, smooth_reacted = 0;
  for (int c = 0; c < 50; ++c) {
    auto cfg = random_causal_config(rng);
    cfg.validate();
    const auto p = testing::random_active_network(cfg, 300 + c);
    const std::size_t T = 12 + rng.below(20);
    const std::size_t t = rng.below(T - 1);
    const auto x = testing::random_matrix(400 + c, T, cfg.input_dim);
    auto x2 = x;
    for (std::size_t s = t + 1; s < T; ++s)
      for (std::size_t k = 0; k < x2.cols(); ++k) x2(s, k) += 1.0 + rng.normal();
    const auto a = forward(p, cfg, x).outputs;
    const auto b = forward(p, cfg, x2).outputs;
    for (std::size_t s = 0; s <= t; ++s) violations += testing::outputs_differ_at(a, b, s);
    bool later = false;
    for (std::size_t s = t + 1; s < T; ++s) later |= testing::outputs_differ_at(a, b, s);
    reacted += later;
    // Without ReLU every unit stays live, so a perturbation must show up later.
    const bool has_relu = std::any_of(cfg.layers.begin(), cfg.layers.end(), [](const auto& l) {
      return std::visit([](const auto& spec) { return spec.activation == Activation::kRelu; }, l);
    });
    if (!has_relu) {
      ++smooth;
      smooth_reacted += later;
    }
  }
  return {violations == 0 && smooth > 0 && smooth_reacted == smooth,
          "50 configs, " + std::to_string(violations) + " frames at or before t changed, " +
              std::to_string(reacted) + " reacted after t (" + std::to_string(smooth_reacted) +
              "/" + std::to_string(smooth) + " without ReLU)"};
}

}  // namespace
}  // namespace dfsmn

int main() {
  using Check = std::function<dfsmn::Outcome()>;
  const std::vector<std::pair<std::string, Check>> checks{
      {"gradient correctness", dfsmn::gradient_correctness},
      {"receptive field", dfsmn::receptive_field_check},
      {"model size", dfsmn::model_size_check},
      {"FLOPS accounting", dfsmn::flops_check},
      {"long-dependency learnability", dfsmn::echo_check},
      {"overfit sanity", dfsmn::overfit_check},
      {"metric oracles", dfsmn::metric_check},
      {"determinism and serialization", dfsmn::determinism_check},
      {"causality", dfsmn::causality_check},
  };
  int failures = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    dfsmn::Outcome o;
    try {
      o = checks[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::printf("criterion %zu %s: %s (%s) [%.1f s]\n", i + 1, o.pass ? "PASS" : "FAIL",
                checks[i].first.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures;
}
