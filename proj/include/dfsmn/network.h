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

// Whole-network construction, multi-stream forward and backward.
//
// The trunk is the ordered layer list of a NetworkConfig. Every output stream
// has its own affine head on top of the last trunk layer. When a DFSMN layer
// has skip enabled, the previous layer's memory output p~ is added into its
// memory block.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "dfsmn/config.h"
#include "dfsmn/layers.h"

namespace dfsmn {

template <typename T>
using LayerParams = std::variant<DfsmnLayerParams<T>, FcLayerParams<T>>;

template <typename T>
struct NetworkParams {
  std::vector<LayerParams<T>> layers;
  // One head per output stream, in config order.
  std::vector<FcLayerParams<T>> heads;
  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

// Parameter classes used for gradient reporting.
inline constexpr const char* kParamClasses[] = {
    "V", "b", "a", "c", "U", "d", "fc.W", "fc.b", "head.W", "head.b"};

template <typename T>
struct ParamTensor {
  const char* param_class;
  std::string name;  // e.g. "layer2.a", "head.mcep.W"
  Matrix<T>* tensor;
};

template <typename T>
struct ConstParamTensor {
  const char* param_class;
  std::string name;
  const Matrix<T>* tensor;
};

// All parameter tensors in declaration order (layers bottom-up, then heads;
// within a DFSMN layer V, b, A, C, U, d).
template <typename T>
std::vector<ParamTensor<T>> param_tensors(NetworkParams<T>& params,
                                          const NetworkConfig& cfg);
template <typename T>
std::vector<ConstParamTensor<T>> param_tensors(const NetworkParams<T>& params,
                                               const NetworkConfig& cfg);

// Exact parameter count from the config alone.
std::uint64_t count_params(const NetworkConfig& cfg);

// Number of scalars actually held by `params`.
template <typename T>
std::uint64_t allocated_scalars(const NetworkParams<T>& params);

// Weights ~ N(0, 1/sqrt(fan_in)); biases and memory coefficients zero.
template <typename T>
NetworkParams<T> build_network(const NetworkConfig& cfg, std::uint64_t seed);

// Same shapes as `cfg` describes, all zero.
template <typename T>
NetworkParams<T> zero_params(const NetworkConfig& cfg);

// Throws ShapeError if `params` does not fit `cfg`.
template <typename T>
void check_params(const NetworkParams<T>& params, const NetworkConfig& cfg);

template <typename T>
using StreamMap = std::map<std::string, Matrix<T>>;

template <typename T>
using LayerCache = std::variant<DfsmnLayerCache<T>, FcLayerCache<T>>;

template <typename T>
struct NetworkCache {
  std::vector<LayerCache<T>> layers;
  std::vector<FcLayerCache<T>> heads;
};

template <typename T>
struct NetworkForward {
  StreamMap<T> outputs;
  NetworkCache<T> cache;
};

template <typename T>
NetworkForward<T> forward(const NetworkParams<T>& params,
                          const NetworkConfig& cfg,
                          const SequenceTensor<T>& input);

template <typename T>
struct NetworkGrads {
  NetworkParams<T> params;
  SequenceTensor<T> input;
};

// Gradients for every parameter given d(loss)/d(stream output) for every
// stream in the config. Throws std::invalid_argument on a missing stream.
template <typename T>
NetworkGrads<T> backward(const NetworkParams<T>& params,
                         const NetworkConfig& cfg, const NetworkCache<T>& cache,
                         const StreamMap<T>& grad_streams);

// dst += scale * src, tensor by tensor.
template <typename T>
void accumulate(NetworkParams<T>& dst, const NetworkParams<T>& src, T scale,
                const NetworkConfig& cfg);

}  // namespace dfsmn
