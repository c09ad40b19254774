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

// Self-describing binary model file (layout in docs/formats.md):
//
//   "DFSM" | u32 version | u32 scalar bytes (4|8) | u64 config length |
//   config JSON | u32 tensor count | per tensor: u32 rows, u32 cols, payload
//
// All integers and payload scalars are little-endian. Tensors follow
// param_tensors() order.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <variant>

#include "dfsmn/config.h"
#include "dfsmn/network.h"

namespace dfsmn {

inline constexpr char kModelMagic[4] = {'D', 'F', 'S', 'M'};
inline constexpr std::uint32_t kModelVersion = 1;

class ModelFormatError : public std::runtime_error {
 public:
  enum class Kind { kBadMagic, kVersionMismatch, kTruncated, kCorrupt, kIo };
  ModelFormatError(Kind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

using AnyNetworkParams = std::variant<NetworkParams<float>, NetworkParams<double>>;

struct LoadedModel {
  NetworkConfig config;
  AnyNetworkParams params;
};

// `cfg.precision` must match T.
template <typename T>
void save_model(std::ostream& out, const NetworkConfig& cfg,
                const NetworkParams<T>& params);
template <typename T>
void save_model(const std::filesystem::path& path, const NetworkConfig& cfg,
                const NetworkParams<T>& params);

LoadedModel load_model(std::istream& in);
LoadedModel load_model(const std::filesystem::path& path);

}  // namespace dfsmn
