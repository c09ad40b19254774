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

#include "dfsmn/layers.h"

#include <cmath>

namespace dfsmn {

Activation parse_activation(std::string_view name) {
  if (name == "linear") return Activation::kLinear;
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "sigmoid") return Activation::kSigmoid;
  throw std::invalid_argument("unknown activation '" + std::string(name) +
                              "' (expected relu, tanh, sigmoid or linear)");
}

std::string_view activation_name(Activation act) {
  switch (act) {
    case Activation::kLinear: return "linear";
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "linear";
}

void MemoryConfig::validate() const {
  if (n_back < 0 || n_ahead < 0) {
    throw std::invalid_argument("memory order must be >= 0 (got n_back=" +
                                std::to_string(n_back) + ", n_ahead=" +
                                std::to_string(n_ahead) + ")");
  }
  if (stride_back < 1 || stride_ahead < 1) {
    throw std::invalid_argument("memory stride must be >= 1 (got stride_back=" +
                                std::to_string(stride_back) +
                                ", stride_ahead=" +
                                std::to_string(stride_ahead) + ")");
  }
}

template <typename T>
DfsmnLayerParams<T> DfsmnLayerParams<T>::zeros(std::size_t d_in,
                                               std::size_t d_proj,
                                               std::size_t d_hidden,
                                               const MemoryConfig& cfg) {
  cfg.validate();
  DfsmnLayerParams p;
  p.V = Matrix<T>(d_in, d_proj);
  p.b = Matrix<T>(1, d_proj);
  p.A = Matrix<T>(static_cast<std::size_t>(cfg.n_back) + 1, d_proj);
  p.C = Matrix<T>(static_cast<std::size_t>(cfg.n_ahead), d_proj);
  p.U = Matrix<T>(d_proj, d_hidden);
  p.d = Matrix<T>(1, d_hidden);
  return p;
}

template <typename T>
void DfsmnLayerParams<T>::validate(const MemoryConfig& cfg) const {
  const std::size_t proj = V.cols();
  if (b.rows() != 1 || b.cols() != proj)
    throw ShapeError("projection bias " + b.shape() + " does not match V " +
                     V.shape());
  if (A.rows() != static_cast<std::size_t>(cfg.n_back) + 1 || A.cols() != proj)
    throw ShapeError("look-back coefficients " + A.shape() + " expected " +
                     Matrix<T>::shape_string(cfg.n_back + 1, proj));
  if (C.rows() != static_cast<std::size_t>(cfg.n_ahead) ||
      (cfg.n_ahead > 0 && C.cols() != proj))
    throw ShapeError("look-ahead coefficients " + C.shape() + " expected " +
                     Matrix<T>::shape_string(cfg.n_ahead, proj));
  if (U.rows() != proj)
    throw ShapeError("output matrix " + U.shape() + " does not match V " +
                     V.shape());
  if (d.rows() != 1 || d.cols() != U.cols())
    throw ShapeError("output bias " + d.shape() + " does not match U " +
                     U.shape());
}

template <typename T>
T apply_activation(Activation act, T z) {
  switch (act) {
    case Activation::kLinear: return z;
    case Activation::kRelu: return z > T(0) ? z : T(0);
    case Activation::kTanh: return std::tanh(z);
    case Activation::kSigmoid:
      if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
      {
        const T e = std::exp(z);
        return e / (T(1) + e);
      }
  }
  return z;
}

template <typename T>
Matrix<T> apply_activation(Activation act, const Matrix<T>& z) {
  Matrix<T> y(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.size(); ++i) y[i] = apply_activation(act, z[i]);
  return y;
}

template <typename T>
Matrix<T> activation_backward(Activation act, const Matrix<T>& z,
                              const Matrix<T>& y, const Matrix<T>& grad_out) {
  if (!grad_out.same_shape(z) || !y.same_shape(z)) {
    throw ShapeError("activation backward: gradient " + grad_out.shape() +
                     " does not match activations " + z.shape());
  }
  Matrix<T> g(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.size(); ++i) {
    T slope = T(1);
    switch (act) {
      case Activation::kLinear: break;
      case Activation::kRelu: slope = z[i] > T(0) ? T(1) : T(0); break;
      case Activation::kTanh: slope = T(1) - y[i] * y[i]; break;
      case Activation::kSigmoid: slope = y[i] * (T(1) - y[i]); break;
    }
    g[i] = grad_out[i] * slope;
  }
  return g;
}

template <typename T>
SequenceTensor<T> project(const SequenceTensor<T>& h, const Matrix<T>& V,
                          const Matrix<T>& b) {
  if (h.cols() != V.rows()) {
    throw ShapeError("project: input " + h.shape() + " does not match V " +
                     V.shape());
  }
  auto p = matmul(h, V);
  add_row_vector(p, b);
  return p;
}

template <typename T>
SequenceTensor<T> memory_block(const SequenceTensor<T>& p, const Matrix<T>& A,
                               const Matrix<T>& C, const MemoryConfig& cfg,
                               const SequenceTensor<T>* skip) {
  cfg.validate();
  const std::size_t frames = p.rows(), dim = p.cols();
  if (A.rows() != static_cast<std::size_t>(cfg.n_back) + 1 || A.cols() != dim) {
    throw ShapeError("memory_block: look-back coefficients " + A.shape() +
                     " do not match order " + std::to_string(cfg.n_back) +
                     " and projection " + p.shape());
  }
  if (C.rows() != static_cast<std::size_t>(cfg.n_ahead) ||
      (cfg.n_ahead > 0 && C.cols() != dim)) {
    throw ShapeError("memory_block: look-ahead coefficients " + C.shape() +
                     " do not match order " + std::to_string(cfg.n_ahead) +
                     " and projection " + p.shape());
  }
  if (cfg.skip != (skip != nullptr)) {
    throw std::invalid_argument(
        cfg.skip ? "memory_block: skip enabled but no skip input given"
                 : "memory_block: skip input given but skip is disabled");
  }
  if (skip && !skip->same_shape(p)) {
    throw ShapeError("memory_block: skip input " + skip->shape() +
                     " does not match projection " + p.shape());
  }

  SequenceTensor<T> out = p;
  if (skip) {
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += (*skip)[k];
  }
  for (std::size_t i = 0; i <= static_cast<std::size_t>(cfg.n_back); ++i) {
    const std::size_t off = i * static_cast<std::size_t>(cfg.stride_back);
    const auto coef = A.row(i);
    for (std::size_t t = off; t < frames; ++t) {
      auto dst = out.row(t);
      const auto src = p.row(t - off);
      for (std::size_t k = 0; k < dim; ++k) dst[k] += coef[k] * src[k];
    }
  }
  for (std::size_t j = 1; j <= static_cast<std::size_t>(cfg.n_ahead); ++j) {
    const std::size_t off = j * static_cast<std::size_t>(cfg.stride_ahead);
    const auto coef = C.row(j - 1);
    for (std::size_t t = 0; t + off < frames; ++t) {
      auto dst = out.row(t);
      const auto src = p.row(t + off);
      for (std::size_t k = 0; k < dim; ++k) dst[k] += coef[k] * src[k];
    }
  }
  return out;
}

template <typename T>
SequenceTensor<T> layer_output(const SequenceTensor<T>& ptilde,
                               const Matrix<T>& U, const Matrix<T>& d,
                               Activation act) {
  if (ptilde.cols() != U.rows()) {
    throw ShapeError("layer_output: memory output " + ptilde.shape() +
                     " does not match U " + U.shape());
  }
  auto z = matmul(ptilde, U);
  add_row_vector(z, d);
  return apply_activation(act, z);
}

template <typename T>
DfsmnLayerForward<T> dfsmn_layer_forward(const SequenceTensor<T>& h,
                                         const DfsmnLayerParams<T>& params,
                                         const MemoryConfig& cfg,
                                         Activation act,
                                         const SequenceTensor<T>* skip) {
  params.validate(cfg);
  DfsmnLayerForward<T> fwd;
  auto& c = fwd.cache;
  c.input = h;
  c.p = project(h, params.V, params.b);
  c.ptilde = memory_block(c.p, params.A, params.C, cfg, skip);
  // layer_output split in two so the pre-activation is kept for backward.
  if (c.ptilde.cols() != params.U.rows()) {
    throw ShapeError("layer_output: memory output " + c.ptilde.shape() +
                     " does not match U " + params.U.shape());
  }
  c.pre_activation = matmul(c.ptilde, params.U);
  add_row_vector(c.pre_activation, params.d);
  c.output = apply_activation(act, c.pre_activation);
  c.cfg = cfg;
  c.activation = act;
  c.has_skip = skip != nullptr;
  fwd.h_next = c.output;
  return fwd;
}

template <typename T>
DfsmnLayerGrads<T> dfsmn_layer_backward(const DfsmnLayerParams<T>& params,
                                        const DfsmnLayerCache<T>& cache,
                                        const SequenceTensor<T>& grad_out,
                                        const SequenceTensor<T>* grad_ptilde_extra) {
  if (!grad_out.same_shape(cache.output)) {
    throw ShapeError("dfsmn backward: gradient " + grad_out.shape() +
                     " does not match layer output " + cache.output.shape());
  }
  if (grad_ptilde_extra && !grad_ptilde_extra->same_shape(cache.ptilde)) {
    throw ShapeError("dfsmn backward: memory gradient " +
                     grad_ptilde_extra->shape() + " does not match " +
                     cache.ptilde.shape());
  }
  const MemoryConfig& cfg = cache.cfg;
  const std::size_t frames = cache.p.rows(), dim = cache.p.cols();

  DfsmnLayerGrads<T> g;
  const auto grad_z = activation_backward(cache.activation, cache.pre_activation,
                                          cache.output, grad_out);
  g.params.U = matmul_tn(cache.ptilde, grad_z);
  g.params.d = column_sums(grad_z);

  auto grad_pt = matmul_nt(grad_z, params.U);
  if (grad_ptilde_extra) axpy(T(1), *grad_ptilde_extra, grad_pt);
  if (cache.has_skip) g.grad_skip = grad_pt;

  SequenceTensor<T> grad_p = grad_pt;
  g.params.A = Matrix<T>(params.A.rows(), dim);
  g.params.C = Matrix<T>(params.C.rows(), params.C.cols());
  for (std::size_t i = 0; i <= static_cast<std::size_t>(cfg.n_back); ++i) {
    const std::size_t off = i * static_cast<std::size_t>(cfg.stride_back);
    const auto coef = params.A.row(i);
    auto coef_grad = g.params.A.row(i);
    for (std::size_t t = off; t < frames; ++t) {
      const auto up = grad_pt.row(t);
      const auto src = cache.p.row(t - off);
      auto dst = grad_p.row(t - off);
      for (std::size_t k = 0; k < dim; ++k) {
        dst[k] += coef[k] * up[k];
        coef_grad[k] += up[k] * src[k];
      }
    }
  }
  for (std::size_t j = 1; j <= static_cast<std::size_t>(cfg.n_ahead); ++j) {
    const std::size_t off = j * static_cast<std::size_t>(cfg.stride_ahead);
    const auto coef = params.C.row(j - 1);
    auto coef_grad = g.params.C.row(j - 1);
    for (std::size_t t = 0; t + off < frames; ++t) {
      const auto up = grad_pt.row(t);
      const auto src = cache.p.row(t + off);
      auto dst = grad_p.row(t + off);
      for (std::size_t k = 0; k < dim; ++k) {
        dst[k] += coef[k] * up[k];
        coef_grad[k] += up[k] * src[k];
      }
    }
  }

  g.params.V = matmul_tn(cache.input, grad_p);
  g.params.b = column_sums(grad_p);
  g.grad_in = matmul_nt(grad_p, params.V);
  return g;
}

template <typename T>
FcLayerForward<T> fc_layer_forward(const SequenceTensor<T>& h,
                                   const FcLayerParams<T>& params,
                                   Activation act) {
  if (h.cols() != params.W.rows()) {
    throw ShapeError("fc layer: input " + h.shape() + " does not match W " +
                     params.W.shape());
  }
  FcLayerForward<T> fwd;
  fwd.cache.input = h;
  fwd.cache.pre_activation = matmul(h, params.W);
  add_row_vector(fwd.cache.pre_activation, params.bias);
  fwd.cache.output = apply_activation(act, fwd.cache.pre_activation);
  fwd.cache.activation = act;
  fwd.output = fwd.cache.output;
  return fwd;
}

template <typename T>
FcLayerGrads<T> fc_layer_backward(const FcLayerParams<T>& params,
                                  const FcLayerCache<T>& cache,
                                  const SequenceTensor<T>& grad_out) {
  if (!grad_out.same_shape(cache.output)) {
    throw ShapeError("fc backward: gradient " + grad_out.shape() +
                     " does not match layer output " + cache.output.shape());
  }
  FcLayerGrads<T> g;
  const auto grad_z = activation_backward(cache.activation, cache.pre_activation,
                                          cache.output, grad_out);
  g.params.W = matmul_tn(cache.input, grad_z);
  g.params.bias = column_sums(grad_z);
  g.grad_in = matmul_nt(grad_z, params.W);
  return g;
}

#define DFSMN_INSTANTIATE_LAYERS(T)                                             \
  template struct DfsmnLayerParams<T>;                                          \
  template T apply_activation(Activation, T);                                   \
  template Matrix<T> apply_activation(Activation, const Matrix<T>&);            \
  template Matrix<T> activation_backward(Activation, const Matrix<T>&,          \
                                         const Matrix<T>&, const Matrix<T>&);   \
  template SequenceTensor<T> project(const SequenceTensor<T>&,                  \
                                     const Matrix<T>&, const Matrix<T>&);       \
  template SequenceTensor<T> memory_block(const SequenceTensor<T>&,             \
                                          const Matrix<T>&, const Matrix<T>&,   \
                                          const MemoryConfig&,                  \
                                          const SequenceTensor<T>*);            \
  template SequenceTensor<T> layer_output(const SequenceTensor<T>&,             \
                                          const Matrix<T>&, const Matrix<T>&,   \
                                          Activation);                          \
  template DfsmnLayerForward<T> dfsmn_layer_forward(                            \
      const SequenceTensor<T>&, const DfsmnLayerParams<T>&,                     \
      const MemoryConfig&, Activation, const SequenceTensor<T>*);               \
  template DfsmnLayerGrads<T> dfsmn_layer_backward(                             \
      const DfsmnLayerParams<T>&, const DfsmnLayerCache<T>&,                    \
      const SequenceTensor<T>&, const SequenceTensor<T>*);                      \
  template FcLayerForward<T> fc_layer_forward(                                  \
      const SequenceTensor<T>&, const FcLayerParams<T>&, Activation);           \
  template FcLayerGrads<T> fc_layer_backward(                                   \
      const FcLayerParams<T>&, const FcLayerCache<T>&, const SequenceTensor<T>&);

DFSMN_INSTANTIATE_LAYERS(float)
DFSMN_INSTANTIATE_LAYERS(double)

#undef DFSMN_INSTANTIATE_LAYERS

}  // namespace dfsmn
