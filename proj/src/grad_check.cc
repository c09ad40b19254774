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

#include "dfsmn/grad_check.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "dfsmn/trainer.h"

namespace dfsmn {

namespace {

using Net = NetworkParams<double>;

double rel_err(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
  return std::abs(analytic - numeric) / denom;
}

void append_signs(std::vector<bool>& sig, Activation act, const Matrix<double>& z) {
  if (act != Activation::kRelu) return;
  for (double v : z.values()) sig.push_back(v > 0.0);
}

// Sign pattern of every relu pre-activation in the network.
std::vector<bool> relu_signature(const NetworkCache<double>& cache) {
  std::vector<bool> sig;
  for (const auto& layer : cache.layers) {
    std::visit([&](const auto& c) { append_signs(sig, c.activation, c.pre_activation); },
               layer);
  }
  for (const auto& h : cache.heads) append_signs(sig, h.activation, h.pre_activation);
  return sig;
}

void record(ClassCheck& cls, double err, const std::string& where) {
  ++cls.checked;
  if (cls.worst.empty() || err > cls.max_rel_err) {
    cls.max_rel_err = err;
    cls.worst = where;
  }
}

struct Probe {
  std::size_t tensor;
  std::size_t index;
};

}  // namespace

GradCheckReport grad_check(const NetworkConfig& cfg, const GradCheckOptions& options) {
  if (cfg.precision != Precision::kFloat64) {
    throw std::invalid_argument("grad_check requires an fp64 network config");
  }
  if (options.frames < 1) throw std::invalid_argument("grad_check needs >= 1 frame");
  cfg.validate();

  const std::uint64_t seed = options.seed;
  Net params = build_network<double>(cfg, seed);
  {
    auto tensors = param_tensors(params, cfg);
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const std::string_view k = tensors[i].param_class;
      double scale = 0.0;
      if (k == "a" || k == "c") scale = 0.3;
      if (k == "b" || k == "d" || k == "fc.b" || k == "head.b") scale = 0.1;
      if (scale == 0.0 || tensors[i].tensor->empty()) continue;
      *tensors[i].tensor =
          seeded_normal<double>(derive_seed(seed ^ 0xA5A5A5A5ULL, i),
                                tensors[i].tensor->rows(), tensors[i].tensor->cols(),
                                0.0, scale);
    }
  }
  Matrix<double> input = seeded_normal<double>(derive_seed(seed, 1001), options.frames,
                                               static_cast<std::size_t>(cfg.input_dim),
                                               0.0, 1.0);
  StreamMap<double> targets;
  for (std::size_t s = 0; s < cfg.output_streams.size(); ++s) {
    const auto& stream = cfg.output_streams[s];
    targets.emplace(stream.name,
                    seeded_normal<double>(derive_seed(seed, 2000 + s), options.frames,
                                          static_cast<std::size_t>(stream.dim), 0.0, 1.0));
  }

  auto loss_of = [&](const Net& p, const Matrix<double>& x, std::vector<bool>* sig) {
    const auto fwd = forward(p, cfg, x);
    if (sig) *sig = relu_signature(fwd.cache);
    return multitask_mse(fwd.outputs, targets).loss;
  };

  const auto base = forward(params, cfg, input);
  const auto base_sig = relu_signature(base.cache);
  const auto mse = multitask_mse(base.outputs, targets);
  auto analytic = backward(params, cfg, base.cache, mse.grads);
  if (options.corrupt_analytic) options.corrupt_analytic(analytic.params);

  GradCheckReport report;
  Rng rng(derive_seed(seed, 3000));
  const double h = options.step;

  // Parameter classes.
  auto tensors = param_tensors(params, cfg);
  const auto grad_tensors = param_tensors(analytic.params, cfg);
  for (const char* cls_name : kParamClasses) {
    std::vector<Probe> probes;
    for (std::size_t t = 0; t < tensors.size(); ++t) {
      if (std::string_view(tensors[t].param_class) != cls_name) continue;
      for (std::size_t i = 0; i < tensors[t].tensor->size(); ++i) probes.push_back({t, i});
    }
    if (probes.empty()) continue;
    rng.shuffle(probes.begin(), probes.end());
    ClassCheck cls;
    for (const auto& pr : probes) {
      if (cls.checked >= options.samples_per_class) break;
      double& theta = (*tensors[pr.tensor].tensor)[pr.index];
      const double old = theta;
      std::vector<bool> sig_plus, sig_minus;
      theta = old + h;
      const double lp = loss_of(params, input, &sig_plus);
      theta = old - h;
      const double lm = loss_of(params, input, &sig_minus);
      theta = old;
      if (sig_plus != base_sig || sig_minus != base_sig) {
        ++cls.skipped_kinks;
        continue;
      }
      const double numeric = (lp - lm) / (2.0 * h);
      const double a = (*grad_tensors[pr.tensor].tensor)[pr.index];
      record(cls, rel_err(a, numeric),
             tensors[pr.tensor].name + "[" + std::to_string(pr.index) + "]");
    }
    report.classes.emplace(cls_name, cls);
  }

  // Input gradient.
  {
    std::vector<std::size_t> idx(input.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng.shuffle(idx.begin(), idx.end());
    ClassCheck cls;
    for (std::size_t i : idx) {
      if (cls.checked >= options.samples_per_class) break;
      const double old = input[i];
      std::vector<bool> sig_plus, sig_minus;
      input[i] = old + h;
      const double lp = loss_of(params, input, &sig_plus);
      input[i] = old - h;
      const double lm = loss_of(params, input, &sig_minus);
      input[i] = old;
      if (sig_plus != base_sig || sig_minus != base_sig) {
        ++cls.skipped_kinks;
        continue;
      }
      record(cls, rel_err(analytic.input[i], (lp - lm) / (2.0 * h)),
             "input[" + std::to_string(i) + "]");
    }
    report.classes.emplace("input", cls);
  }

  // Skip-path gradient, one skip-connected layer at a time, under a random
  // linear functional of the layer output.
  {
    struct SkipLayer {
      std::size_t layer;
      const DfsmnLayerCache<double>* cache;
      const Matrix<double>* skip;
      Matrix<double> upstream;
      Matrix<double> grad_skip;
    };
    std::vector<SkipLayer> layers;
    for (std::size_t l = 1; l < cfg.layers.size(); ++l) {
      const auto* c = std::get_if<DfsmnLayerCache<double>>(&base.cache.layers[l]);
      if (!c || !c->has_skip) continue;
      const auto& prev = std::get<DfsmnLayerCache<double>>(base.cache.layers[l - 1]);
      const auto& p = std::get<DfsmnLayerParams<double>>(params.layers[l]);
      SkipLayer sl{l, c, &prev.ptilde,
                   seeded_normal<double>(derive_seed(seed, 4000 + l), c->output.rows(),
                                         c->output.cols(), 0.0, 1.0),
                   {}};
      sl.grad_skip = *dfsmn_layer_backward(p, *c, sl.upstream).grad_skip;
      layers.push_back(std::move(sl));
    }
    std::vector<Probe> probes;
    for (std::size_t k = 0; k < layers.size(); ++k)
      for (std::size_t i = 0; i < layers[k].skip->size(); ++i) probes.push_back({k, i});
    rng.shuffle(probes.begin(), probes.end());
    ClassCheck cls;
    for (const auto& pr : probes) {
      if (cls.checked >= options.samples_per_class) break;
      const auto& sl = layers[pr.tensor];
      const auto& p = std::get<DfsmnLayerParams<double>>(params.layers[sl.layer]);
      auto eval = [&](double delta, std::vector<bool>& sig) {
        Matrix<double> skip = *sl.skip;
        skip[pr.index] += delta;
        const auto fwd = dfsmn_layer_forward(sl.cache->input, p, sl.cache->cfg,
                                             sl.cache->activation, &skip);
        sig.clear();
        append_signs(sig, sl.cache->activation, fwd.cache.pre_activation);
        double acc = 0.0;
        for (std::size_t i = 0; i < fwd.h_next.size(); ++i)
          acc += sl.upstream[i] * fwd.h_next[i];
        return acc;
      };
      std::vector<bool> sig0, sig_plus, sig_minus;
      append_signs(sig0, sl.cache->activation, sl.cache->pre_activation);
      const double lp = eval(h, sig_plus);
      const double lm = eval(-h, sig_minus);
      if (sig_plus != sig0 || sig_minus != sig0) {
        ++cls.skipped_kinks;
        continue;
      }
      record(cls, rel_err(sl.grad_skip[pr.index], (lp - lm) / (2.0 * h)),
             "layer" + std::to_string(sl.layer) + ".skip[" + std::to_string(pr.index) +
                 "]");
    }
    if (!layers.empty()) report.classes.emplace("skip", cls);
  }

  report.pass = true;
  for (const auto& [name, cls] : report.classes) {
    if (cls.checked == 0 || cls.max_rel_err >= options.tolerance) report.pass = false;
    if (cls.max_rel_err >= report.worst_rel_err) {
      report.worst_rel_err = cls.max_rel_err;
      report.worst_class = name;
    }
  }
  return report;
}

}  // namespace dfsmn
