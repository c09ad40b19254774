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

#include <cmath>
#include <optional>

namespace dfsmn {

namespace {

template <typename P, typename Out>
void collect_tensors(P& params, const NetworkConfig& cfg, Out& out) {
  if (params.layers.size() != cfg.layers.size() ||
      params.heads.size() != cfg.output_streams.size()) {
    throw ShapeError("parameters hold " + std::to_string(params.layers.size()) +
                     " layers / " + std::to_string(params.heads.size()) +
                     " heads, config expects " +
                     std::to_string(cfg.layers.size()) + " / " +
                     std::to_string(cfg.output_streams.size()));
  }
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const std::string prefix = "layer" + std::to_string(l) + ".";
    auto& layer = params.layers[l];
    if (auto* d = std::get_if<0>(&layer)) {
      out.push_back({"V", prefix + "V", &d->V});
      out.push_back({"b", prefix + "b", &d->b});
      out.push_back({"a", prefix + "a", &d->A});
      out.push_back({"c", prefix + "c", &d->C});
      out.push_back({"U", prefix + "U", &d->U});
      out.push_back({"d", prefix + "d", &d->d});
    } else {
      auto& f = std::get<1>(layer);
      out.push_back({"fc.W", prefix + "W", &f.W});
      out.push_back({"fc.b", prefix + "bias", &f.bias});
    }
  }
  for (std::size_t s = 0; s < params.heads.size(); ++s) {
    const std::string prefix = "head." + cfg.output_streams[s].name + ".";
    out.push_back({"head.W", prefix + "W", &params.heads[s].W});
    out.push_back({"head.b", prefix + "bias", &params.heads[s].bias});
  }
}

template <typename T>
NetworkParams<T> shaped_params(const NetworkConfig& cfg) {
  cfg.validate();
  NetworkParams<T> p;
  std::size_t d_in = static_cast<std::size_t>(cfg.input_dim);
  for (const auto& spec : cfg.layers) {
    if (const auto* d = std::get_if<DfsmnLayerSpec>(&spec)) {
      p.layers.emplace_back(DfsmnLayerParams<T>::zeros(
          d_in, static_cast<std::size_t>(d->proj),
          static_cast<std::size_t>(d->hidden), d->memory));
      d_in = static_cast<std::size_t>(d->hidden);
    } else {
      const auto& f = std::get<FcLayerSpec>(spec);
      const auto hidden = static_cast<std::size_t>(f.hidden);
      p.layers.emplace_back(
          FcLayerParams<T>{Matrix<T>(d_in, hidden), Matrix<T>(1, hidden)});
      d_in = hidden;
    }
  }
  for (const auto& s : cfg.output_streams) {
    const auto dim = static_cast<std::size_t>(s.dim);
    p.heads.push_back({Matrix<T>(d_in, dim), Matrix<T>(1, dim)});
  }
  return p;
}

bool is_weight_class(const char* c) {
  const std::string_view k(c);
  return k == "V" || k == "U" || k == "fc.W" || k == "head.W";
}

}  // namespace

template <typename T>
std::vector<ParamTensor<T>> param_tensors(NetworkParams<T>& params,
                                          const NetworkConfig& cfg) {
  std::vector<ParamTensor<T>> out;
  collect_tensors(params, cfg, out);
  return out;
}

template <typename T>
std::vector<ConstParamTensor<T>> param_tensors(const NetworkParams<T>& params,
                                               const NetworkConfig& cfg) {
  std::vector<ConstParamTensor<T>> out;
  collect_tensors(params, cfg, out);
  return out;
}

std::uint64_t count_params(const NetworkConfig& cfg) {
  cfg.validate();
  std::uint64_t total = 0;
  std::uint64_t d_in = static_cast<std::uint64_t>(cfg.input_dim);
  for (const auto& spec : cfg.layers) {
    if (const auto* d = std::get_if<DfsmnLayerSpec>(&spec)) {
      const std::uint64_t proj = d->proj, hidden = d->hidden;
      const std::uint64_t taps = static_cast<std::uint64_t>(
          d->memory.n_back + 1 + d->memory.n_ahead);
      total += d_in * proj + proj + taps * proj + proj * hidden + hidden;
      d_in = hidden;
    } else {
      const std::uint64_t hidden = std::get<FcLayerSpec>(spec).hidden;
      total += d_in * hidden + hidden;
      d_in = hidden;
    }
  }
  for (const auto& s : cfg.output_streams) {
    total += d_in * static_cast<std::uint64_t>(s.dim) + s.dim;
  }
  return total;
}

template <typename T>
std::uint64_t allocated_scalars(const NetworkParams<T>& params) {
  std::uint64_t n = 0;
  for (const auto& layer : params.layers) {
    std::visit(
        [&n](const auto& l) {
          if constexpr (std::is_same_v<std::decay_t<decltype(l)>,
                                       DfsmnLayerParams<T>>) {
            n += l.V.size() + l.b.size() + l.A.size() + l.C.size() +
                 l.U.size() + l.d.size();
          } else {
            n += l.W.size() + l.bias.size();
          }
        },
        layer);
  }
  for (const auto& h : params.heads) n += h.W.size() + h.bias.size();
  return n;
}

template <typename T>
NetworkParams<T> zero_params(const NetworkConfig& cfg) {
  return shaped_params<T>(cfg);
}

template <typename T>
NetworkParams<T> build_network(const NetworkConfig& cfg, std::uint64_t seed) {
  auto params = shaped_params<T>(cfg);
  auto tensors = param_tensors(params, cfg);
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    auto& t = tensors[i];
    if (!is_weight_class(t.param_class) || t.tensor->empty()) continue;
    const double fan_in = static_cast<double>(t.tensor->rows());
    *t.tensor = seeded_normal<T>(derive_seed(seed, i), t.tensor->rows(),
                                 t.tensor->cols(), 0.0, 1.0 / std::sqrt(fan_in));
  }
  return params;
}

template <typename T>
void check_params(const NetworkParams<T>& params, const NetworkConfig& cfg) {
  const auto expected = shaped_params<T>(cfg);
  const auto want = param_tensors(expected, cfg);
  const auto have = param_tensors(params, cfg);
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (!want[i].tensor->same_shape(*have[i].tensor)) {
      throw ShapeError("parameter " + want[i].name + " has shape " +
                       have[i].tensor->shape() + ", config expects " +
                       want[i].tensor->shape());
    }
  }
}

template <typename T>
NetworkForward<T> forward(const NetworkParams<T>& params,
                          const NetworkConfig& cfg,
                          const SequenceTensor<T>& input) {
  check_params(params, cfg);
  if (input.cols() != static_cast<std::size_t>(cfg.input_dim) ||
      input.rows() == 0) {
    throw ShapeError("network input " + input.shape() + " expected T x " +
                     std::to_string(cfg.input_dim));
  }
  NetworkForward<T> out;
  auto& cache = out.cache;
  cache.layers.reserve(cfg.layers.size());

  SequenceTensor<T> h = input;
  const SequenceTensor<T>* prev_ptilde = nullptr;
  for (std::size_t l = 0; l < cfg.layers.size(); ++l) {
    if (const auto* spec = std::get_if<DfsmnLayerSpec>(&cfg.layers[l])) {
      const auto& p = std::get<DfsmnLayerParams<T>>(params.layers[l]);
      const SequenceTensor<T>* skip = spec->memory.skip ? prev_ptilde : nullptr;
      auto fwd = dfsmn_layer_forward(h, p, spec->memory, spec->activation, skip);
      h = std::move(fwd.h_next);
      cache.layers.emplace_back(std::move(fwd.cache));
      prev_ptilde = &std::get<DfsmnLayerCache<T>>(cache.layers.back()).ptilde;
    } else {
      const auto& spec_fc = std::get<FcLayerSpec>(cfg.layers[l]);
      const auto& p = std::get<FcLayerParams<T>>(params.layers[l]);
      auto fwd = fc_layer_forward(h, p, spec_fc.activation);
      h = std::move(fwd.output);
      cache.layers.emplace_back(std::move(fwd.cache));
      prev_ptilde = nullptr;
    }
  }
  for (std::size_t s = 0; s < cfg.output_streams.size(); ++s) {
    const auto& stream = cfg.output_streams[s];
    auto fwd = fc_layer_forward(h, params.heads[s], stream.activation);
    out.outputs.emplace(stream.name, std::move(fwd.output));
    cache.heads.push_back(std::move(fwd.cache));
  }
  return out;
}

template <typename T>
NetworkGrads<T> backward(const NetworkParams<T>& params,
                         const NetworkConfig& cfg, const NetworkCache<T>& cache,
                         const StreamMap<T>& grad_streams) {
  if (cache.layers.size() != cfg.layers.size() ||
      cache.heads.size() != cfg.output_streams.size()) {
    throw ShapeError("backward: cache does not come from this network");
  }
  NetworkGrads<T> grads;
  grads.params.layers.resize(cfg.layers.size());
  grads.params.heads.resize(cfg.output_streams.size());

  std::optional<SequenceTensor<T>> grad_h;
  for (std::size_t s = 0; s < cfg.output_streams.size(); ++s) {
    const auto& name = cfg.output_streams[s].name;
    const auto it = grad_streams.find(name);
    if (it == grad_streams.end()) {
      throw std::invalid_argument("backward: missing gradient for stream '" +
                                  name + "'");
    }
    auto g = fc_layer_backward(params.heads[s], cache.heads[s], it->second);
    grads.params.heads[s] = std::move(g.params);
    if (grad_h) {
      axpy(T(1), g.grad_in, *grad_h);
    } else {
      grad_h = std::move(g.grad_in);
    }
  }

  std::optional<SequenceTensor<T>> pending_skip;
  for (std::size_t l = cfg.layers.size(); l-- > 0;) {
    if (const auto* c = std::get_if<DfsmnLayerCache<T>>(&cache.layers[l])) {
      const auto& p = std::get<DfsmnLayerParams<T>>(params.layers[l]);
      auto g = dfsmn_layer_backward(p, *c, *grad_h,
                                    pending_skip ? &*pending_skip : nullptr);
      pending_skip = std::move(g.grad_skip);
      grads.params.layers[l] = std::move(g.params);
      grad_h = std::move(g.grad_in);
    } else {
      const auto& c_fc = std::get<FcLayerCache<T>>(cache.layers[l]);
      const auto& p = std::get<FcLayerParams<T>>(params.layers[l]);
      auto g = fc_layer_backward(p, c_fc, *grad_h);
      grads.params.layers[l] = std::move(g.params);
      grad_h = std::move(g.grad_in);
      pending_skip.reset();
    }
  }
  grads.input = std::move(*grad_h);
  return grads;
}

template <typename T>
void accumulate(NetworkParams<T>& dst, const NetworkParams<T>& src, T scale,
                const NetworkConfig& cfg) {
  auto d = param_tensors(dst, cfg);
  const auto s = param_tensors(src, cfg);
  for (std::size_t i = 0; i < d.size(); ++i) axpy(scale, *s[i].tensor, *d[i].tensor);
}

#define DFSMN_INSTANTIATE_NETWORK(T)                                           \
  template std::vector<ParamTensor<T>> param_tensors(NetworkParams<T>&,        \
                                                     const NetworkConfig&);    \
  template std::vector<ConstParamTensor<T>> param_tensors(                     \
      const NetworkParams<T>&, const NetworkConfig&);                          \
  template std::uint64_t allocated_scalars(const NetworkParams<T>&);           \
  template NetworkParams<T> build_network<T>(const NetworkConfig&,             \
                                             std::uint64_t);                   \
  template NetworkParams<T> zero_params<T>(const NetworkConfig&);              \
  template void check_params(const NetworkParams<T>&, const NetworkConfig&);   \
  template NetworkForward<T> forward(const NetworkParams<T>&,                  \
                                     const NetworkConfig&,                     \
                                     const SequenceTensor<T>&);                \
  template NetworkGrads<T> backward(const NetworkParams<T>&,                   \
                                    const NetworkConfig&,                      \
                                    const NetworkCache<T>&,                    \
                                    const StreamMap<T>&);                      \
  template void accumulate(NetworkParams<T>&, const NetworkParams<T>&, T,      \
                           const NetworkConfig&);

DFSMN_INSTANTIATE_NETWORK(float)
DFSMN_INSTANTIATE_NETWORK(double)

#undef DFSMN_INSTANTIATE_NETWORK

}  // namespace dfsmn
