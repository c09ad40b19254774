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

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "dfsmn/layers.h"

namespace dfsmn {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DfsmnLayerSpec {
  int hidden = 2048;
  int proj = 512;
  MemoryConfig memory;
  Activation activation = Activation::kRelu;
  friend bool operator==(const DfsmnLayerSpec&, const DfsmnLayerSpec&) = default;
};

struct FcLayerSpec {
  int hidden = 2048;
  Activation activation = Activation::kRelu;
  friend bool operator==(const FcLayerSpec&, const FcLayerSpec&) = default;
};

using LayerSpec = std::variant<DfsmnLayerSpec, FcLayerSpec>;

struct StreamSpec {
  std::string name;
  int dim = 1;
  Activation activation = Activation::kLinear;
  friend bool operator==(const StreamSpec&, const StreamSpec&) = default;
};

enum class Precision { kFloat32, kFloat64 };

struct NetworkConfig {
  int input_dim = 754;
  std::vector<LayerSpec> layers;
  std::vector<StreamSpec> output_streams;
  Precision precision = Precision::kFloat32;

  // Throws ConfigError describing the first violated constraint.
  void validate() const;
  std::size_t num_dfsmn_layers() const;
  std::size_t num_fc_layers() const;
  // Output width of the last trunk layer (input of the stream heads).
  int top_dim() const;
  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

// mcep 60 / lf0 3 / bap 11 linear, uv 1 sigmoid.
std::vector<StreamSpec> default_output_streams();

// "N1,N2,s1,s2" -> memory config (skip left off).
MemoryConfig parse_order_tuple(std::string_view text);
// "Nc+Nd" -> (dfsmn layer count, fc layer count).
std::pair<int, int> parse_layer_counts(std::string_view text);

struct ShorthandOptions {
  int input_dim = 754;
  int hidden = 2048;
  int proj = 512;
  int fc_hidden = 2048;
  Activation activation = Activation::kRelu;
  // Skip connections on every DFSMN layer after the first.
  bool skip = true;
};

// Expands the "Nc+Nd" / "N1,N2,s1,s2" notation into a full config with the
// DFSMN layers first and the fully-connected layers above them.
NetworkConfig expand_shorthand(std::string_view layer_counts,
                               std::string_view orders,
                               const ShorthandOptions& options = {});

// Built-in configurations A..I.
std::vector<std::string> preset_names();
NetworkConfig preset_config(std::string_view name);

// Parses a JSON config document (schema in docs/formats.md). Errors carry the
// JSON path of the offending element.
NetworkConfig parse_config(std::string_view text);
NetworkConfig load_config_file(const std::filesystem::path& path);

// Canonical JSON form; parse_config(config_to_text(c)) == c.
std::string config_to_text(const NetworkConfig& cfg);

}  // namespace dfsmn
