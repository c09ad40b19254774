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

// Compact FSMN / Deep-FSMN layers with hand-written backward passes.
//
// A DFSMN layer maps an input sequence h (T x d_in) to h' (T x d_hidden):
//
//   p_t  = h_t V + b                                       (projection)
//   p~_t = [skip_t] + p_t + sum_{i=0..N1} a_i . p_{t - s1*i}
//                         + sum_{j=1..N2} c_j . p_{t + s2*j} (memory block)
//   h'_t = f(p~_t U + d)                                    (output)
//
// where `.` is the element-wise product and taps outside [0, T) read zero.
// The skip term is the previous layer's p~ (identity mapping), present only
// when MemoryConfig::skip is set.

#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "dfsmn/tensor.h"

namespace dfsmn {

enum class Activation { kLinear, kRelu, kTanh, kSigmoid };

// Throws std::invalid_argument on an unknown name.
Activation parse_activation(std::string_view name);
std::string_view activation_name(Activation act);

struct MemoryConfig {
  int n_back = 0;        // look-back order N1
  int n_ahead = 0;       // look-ahead order N2
  int stride_back = 1;   // s1
  int stride_ahead = 1;  // s2
  bool skip = false;

  void validate() const;
  friend bool operator==(const MemoryConfig&, const MemoryConfig&) = default;
};

template <typename T>
struct DfsmnLayerParams {
  Matrix<T> V;  // d_in x d_proj
  Matrix<T> b;  // 1 x d_proj
  Matrix<T> A;  // (N1 + 1) x d_proj, row i is a_i
  Matrix<T> C;  // N2 x d_proj, row j-1 is c_j
  Matrix<T> U;  // d_proj x d_hidden
  Matrix<T> d;  // 1 x d_hidden

  static DfsmnLayerParams zeros(std::size_t d_in, std::size_t d_proj,
                                std::size_t d_hidden, const MemoryConfig& cfg);
  std::size_t proj_dim() const { return V.cols(); }
  std::size_t hidden_dim() const { return U.cols(); }
  // Throws ShapeError when the matrices disagree with each other or `cfg`.
  void validate(const MemoryConfig& cfg) const;
  friend bool operator==(const DfsmnLayerParams&,
                         const DfsmnLayerParams&) = default;
};

template <typename T>
struct FcLayerParams {
  Matrix<T> W;     // d_in x d_out
  Matrix<T> bias;  // 1 x d_out
  friend bool operator==(const FcLayerParams&, const FcLayerParams&) = default;
};

template <typename T>
T apply_activation(Activation act, T z);

template <typename T>
Matrix<T> apply_activation(Activation act, const Matrix<T>& z);

// grad_z = grad_out . f'(z), using the cached pre-activation z and output y.
template <typename T>
Matrix<T> activation_backward(Activation act, const Matrix<T>& z,
                              const Matrix<T>& y, const Matrix<T>& grad_out);

template <typename T>
SequenceTensor<T> project(const SequenceTensor<T>& h, const Matrix<T>& V,
                          const Matrix<T>& b);

template <typename T>
SequenceTensor<T> memory_block(const SequenceTensor<T>& p, const Matrix<T>& A,
                               const Matrix<T>& C, const MemoryConfig& cfg,
                               const SequenceTensor<T>* skip = nullptr);

template <typename T>
SequenceTensor<T> layer_output(const SequenceTensor<T>& ptilde,
                               const Matrix<T>& U, const Matrix<T>& d,
                               Activation act);

// Everything backward needs from a forward call.
template <typename T>
struct DfsmnLayerCache {
  SequenceTensor<T> input;
  SequenceTensor<T> p;
  SequenceTensor<T> ptilde;
  SequenceTensor<T> pre_activation;
  SequenceTensor<T> output;
  MemoryConfig cfg;
  Activation activation = Activation::kRelu;
  bool has_skip = false;
};

template <typename T>
struct DfsmnLayerForward {
  SequenceTensor<T> h_next;
  DfsmnLayerCache<T> cache;
  // Same as cache.ptilde; fed to the next layer's skip input.
  const SequenceTensor<T>& ptilde() const { return cache.ptilde; }
};

template <typename T>
DfsmnLayerForward<T> dfsmn_layer_forward(const SequenceTensor<T>& h,
                                         const DfsmnLayerParams<T>& params,
                                         const MemoryConfig& cfg,
                                         Activation act,
                                         const SequenceTensor<T>* skip = nullptr);

template <typename T>
struct DfsmnLayerGrads {
  SequenceTensor<T> grad_in;
  std::optional<SequenceTensor<T>> grad_skip;
  DfsmnLayerParams<T> params;
};

// Backward through one DFSMN layer. `grad_ptilde_extra`, when given, is a
// gradient arriving at this layer's p~ from outside the layer (the next
// layer's skip path) and is added before back-propagating through the
// memory block.
template <typename T>
DfsmnLayerGrads<T> dfsmn_layer_backward(
    const DfsmnLayerParams<T>& params, const DfsmnLayerCache<T>& cache,
    const SequenceTensor<T>& grad_out,
    const SequenceTensor<T>* grad_ptilde_extra = nullptr);

template <typename T>
struct FcLayerCache {
  SequenceTensor<T> input;
  SequenceTensor<T> pre_activation;
  SequenceTensor<T> output;
  Activation activation = Activation::kRelu;
};

template <typename T>
struct FcLayerForward {
  SequenceTensor<T> output;
  FcLayerCache<T> cache;
};

template <typename T>
FcLayerForward<T> fc_layer_forward(const SequenceTensor<T>& h,
                                   const FcLayerParams<T>& params,
                                   Activation act);

template <typename T>
struct FcLayerGrads {
  SequenceTensor<T> grad_in;
  FcLayerParams<T> params;
};

template <typename T>
FcLayerGrads<T> fc_layer_backward(const FcLayerParams<T>& params,
                                  const FcLayerCache<T>& cache,
                                  const SequenceTensor<T>& grad_out);

}  // namespace dfsmn
