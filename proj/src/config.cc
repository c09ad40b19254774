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

#include "dfsmn/config.h"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace dfsmn {

using json = nlohmann::ordered_json;

namespace {

struct PresetRow {
  const char* name;
  const char* layers;
  const char* orders;
};

constexpr PresetRow kPresets[] = {
    {"A", "3+2", "1,1,1,1"},    {"B", "3+2", "2,2,2,2"},
    {"C", "3+2", "5,5,2,2"},    {"D", "3+2", "10,10,2,2"},
    {"E", "6+2", "10,10,2,2"},  {"F", "10+2", "10,10,2,2"},
    {"G", "10+2", "20,20,2,2"}, {"H", "10+2", "40,40,2,2"},
    {"I", "10+2", "80,80,2,2"},
};

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

int parse_int(std::string_view text, std::string_view what) {
  text = trim(text);
  int value = 0;
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError("malformed " + std::string(what) + ": '" +
                      std::string(text) + "' is not an integer");
  }
  return value;
}

// Walks a JSON object, rejecting keys that were never read.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path)
      : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail(path_, "expected an object");
  }

  [[noreturn]] static void fail(const std::string& path,
                                const std::string& msg) {
    throw ConfigError("config error at " + path + ": " + msg);
  }

  std::string key_path(std::string_view key) const {
    return path_ + "." + std::string(key);
  }

  bool has(std::string_view key) const { return obj_.contains(key); }

  const json& get(std::string_view key) {
    seen_.insert(std::string(key));
    if (!obj_.contains(key)) fail(key_path(key), "missing required key");
    return obj_.at(std::string(key));
  }

  int get_int(std::string_view key) {
    const auto& v = get(key);
    if (!v.is_number_integer()) fail(key_path(key), "expected an integer");
    return v.get<int>();
  }
  int get_int(std::string_view key, int fallback) {
    return has(key) ? get_int(key) : fallback;
  }

  bool get_bool(std::string_view key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& v = get(key);
    if (!v.is_boolean()) fail(key_path(key), "expected true or false");
    return v.get<bool>();
  }

  std::string get_string(std::string_view key) {
    const auto& v = get(key);
    if (!v.is_string()) fail(key_path(key), "expected a string");
    return v.get<std::string>();
  }

  Activation get_activation(std::string_view key, Activation fallback) {
    if (!has(key)) return fallback;
    const auto name = get_string(key);
    try {
      return parse_activation(name);
    } catch (const std::invalid_argument& e) {
      fail(key_path(key), e.what());
    }
  }

  void finish() const {
    for (const auto& [k, v] : obj_.items()) {
      if (!seen_.count(k)) fail(key_path(k), "unknown key");
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename F>
auto wrap_value_error(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    ObjectReader::fail(path, e.what());
  } catch (const std::invalid_argument& e) {
    ObjectReader::fail(path, e.what());
  }
}

MemoryConfig read_memory(ObjectReader& r) {
  MemoryConfig m;
  if (r.has("order")) {
    const auto text = r.get_string("order");
    m = wrap_value_error(r.key_path("order"),
                         [&] { return parse_order_tuple(text); });
    for (const char* k : {"n_back", "n_ahead", "stride_back", "stride_ahead"}) {
      if (r.has(k)) ObjectReader::fail(r.key_path(k), "conflicts with 'order'");
    }
  } else {
    m.n_back = r.get_int("n_back", 0);
    m.n_ahead = r.get_int("n_ahead", 0);
    m.stride_back = r.get_int("stride_back", 1);
    m.stride_ahead = r.get_int("stride_ahead", 1);
  }
  m.skip = r.get_bool("skip", false);
  return m;
}

LayerSpec read_layer(const json& node, const std::string& path) {
  if (!node.is_object() || node.size() != 1) {
    ObjectReader::fail(path, "expected {\"dfsmn\": {...}} or {\"fc\": {...}}");
  }
  const auto& [kind, body] = *node.items().begin();
  const std::string body_path = path + "." + kind;
  if (kind == "dfsmn") {
    ObjectReader r(body, body_path);
    DfsmnLayerSpec spec;
    spec.hidden = r.get_int("hidden");
    spec.proj = r.get_int("proj");
    spec.memory = read_memory(r);
    spec.activation = r.get_activation("activation", Activation::kRelu);
    r.finish();
    return spec;
  }
  if (kind == "fc") {
    ObjectReader r(body, body_path);
    FcLayerSpec spec;
    spec.hidden = r.get_int("hidden");
    spec.activation = r.get_activation("activation", Activation::kRelu);
    r.finish();
    return spec;
  }
  ObjectReader::fail(path + "." + kind, "unknown layer type");
}

std::vector<StreamSpec> read_streams(const json& node, const std::string& path) {
  if (!node.is_array()) ObjectReader::fail(path, "expected an array");
  std::vector<StreamSpec> streams;
  for (std::size_t i = 0; i < node.size(); ++i) {
    ObjectReader r(node[i], path + "[" + std::to_string(i) + "]");
    StreamSpec s;
    s.name = r.get_string("name");
    s.dim = r.get_int("dim");
    s.activation = r.get_activation("activation", Activation::kLinear);
    r.finish();
    streams.push_back(std::move(s));
  }
  return streams;
}

Precision read_precision(ObjectReader& r, Precision fallback) {
  if (!r.has("precision")) return fallback;
  const auto p = r.get_string("precision");
  if (p == "fp32") return Precision::kFloat32;
  if (p == "fp64") return Precision::kFloat64;
  ObjectReader::fail(r.key_path("precision"), "expected 'fp32' or 'fp64'");
}

}  // namespace

void NetworkConfig::validate() const {
  if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
  if (layers.empty()) throw ConfigError("network needs at least one layer");
  if (output_streams.empty())
    throw ConfigError("network needs at least one output stream");

  std::set<std::string> names;
  for (const auto& s : output_streams) {
    if (s.name.empty()) throw ConfigError("output stream with empty name");
    if (s.dim < 1)
      throw ConfigError("output stream '" + s.name + "' must have dim >= 1");
    if (!names.insert(s.name).second)
      throw ConfigError("duplicate output stream '" + s.name + "'");
  }

  bool any_skip = false;
  int shared_proj = -1;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string where = "layers[" + std::to_string(l) + "]";
    if (const auto* d = std::get_if<DfsmnLayerSpec>(&layers[l])) {
      if (d->hidden < 1 || d->proj < 1)
        throw ConfigError(where + ": hidden and proj must be >= 1");
      try {
        d->memory.validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
      }
      if (d->memory.skip) {
        any_skip = true;
        if (l == 0 || !std::holds_alternative<DfsmnLayerSpec>(layers[l - 1])) {
          throw ConfigError(where +
                            ": skip requires the previous layer to be DFSMN");
        }
      }
    } else {
      if (std::get<FcLayerSpec>(layers[l]).hidden < 1)
        throw ConfigError(where + ": hidden must be >= 1");
    }
  }
  if (any_skip) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (const auto* d = std::get_if<DfsmnLayerSpec>(&layers[l])) {
        if (shared_proj < 0) shared_proj = d->proj;
        if (d->proj != shared_proj) {
          throw ConfigError("layers[" + std::to_string(l) + "]: proj " +
                            std::to_string(d->proj) +
                            " differs from " + std::to_string(shared_proj) +
                            "; skip connections need equal memory sizes");
        }
      }
    }
  }
}

std::size_t NetworkConfig::num_dfsmn_layers() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += std::holds_alternative<DfsmnLayerSpec>(l);
  return n;
}

std::size_t NetworkConfig::num_fc_layers() const {
  return layers.size() - num_dfsmn_layers();
}

int NetworkConfig::top_dim() const {
  if (layers.empty()) return input_dim;
  return std::visit([](const auto& s) { return s.hidden; }, layers.back());
}

std::vector<StreamSpec> default_output_streams() {
  return {{"mcep", 60, Activation::kLinear},
          {"lf0", 3, Activation::kLinear},
          {"bap", 11, Activation::kLinear},
          {"uv", 1, Activation::kSigmoid}};
}

MemoryConfig parse_order_tuple(std::string_view text) {
  const auto parts = split(text, ',');
  if (parts.size() != 4) {
    throw ConfigError("malformed order tuple '" + std::string(text) +
                      "': expected N1,N2,s1,s2");
  }
  MemoryConfig m;
  m.n_back = parse_int(parts[0], "look-back order N1");
  m.n_ahead = parse_int(parts[1], "look-ahead order N2");
  m.stride_back = parse_int(parts[2], "look-back stride s1");
  m.stride_ahead = parse_int(parts[3], "look-ahead stride s2");
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("malformed order tuple '" + std::string(text) +
                      "': " + e.what());
  }
  return m;
}

std::pair<int, int> parse_layer_counts(std::string_view text) {
  const auto parts = split(text, '+');
  if (parts.size() != 2) {
    throw ConfigError("malformed layer counts '" + std::string(text) +
                      "': expected Nc+Nd");
  }
  const int nc = parse_int(parts[0], "DFSMN layer count");
  const int nd = parse_int(parts[1], "fully-connected layer count");
  if (nc < 0 || nd < 0 || nc + nd == 0) {
    throw ConfigError("malformed layer counts '" + std::string(text) +
                      "': need a non-negative split with at least one layer");
  }
  return {nc, nd};
}

NetworkConfig expand_shorthand(std::string_view layer_counts,
                               std::string_view orders,
                               const ShorthandOptions& options) {
  const auto [nc, nd] = parse_layer_counts(layer_counts);
  const auto memory = parse_order_tuple(orders);
  NetworkConfig cfg;
  cfg.input_dim = options.input_dim;
  for (int l = 0; l < nc; ++l) {
    DfsmnLayerSpec d;
    d.hidden = options.hidden;
    d.proj = options.proj;
    d.memory = memory;
    d.memory.skip = options.skip && l > 0;
    d.activation = options.activation;
    cfg.layers.emplace_back(d);
  }
  for (int l = 0; l < nd; ++l) {
    cfg.layers.emplace_back(FcLayerSpec{options.fc_hidden, options.activation});
  }
  cfg.output_streams = default_output_streams();
  cfg.validate();
  return cfg;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& p : kPresets) names.emplace_back(p.name);
  return names;
}

NetworkConfig preset_config(std::string_view name) {
  for (const auto& p : kPresets) {
    if (name == p.name) return expand_shorthand(p.layers, p.orders);
  }
  throw ConfigError("unknown preset '" + std::string(name) +
                    "' (expected one of A..I)");
}

NetworkConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError("config is not valid JSON (byte " +
                      std::to_string(e.byte) + "): " + e.what());
  }
  ObjectReader root(doc, "$");
  NetworkConfig cfg;

  if (root.has("preset")) {
    const auto name = root.get_string("preset");
    cfg = wrap_value_error(root.key_path("preset"),
                           [&] { return preset_config(name); });
    if (root.has("layers"))
      ObjectReader::fail(root.key_path("layers"), "conflicts with 'preset'");
    cfg.input_dim = root.get_int("input_dim", cfg.input_dim);
  } else {
    cfg.input_dim = root.get_int("input_dim");
    const auto& layers = root.get("layers");
    if (layers.is_string()) {
      // Shorthand: "layers": "6+2" with per-kind settings alongside.
      ShorthandOptions opt;
      opt.input_dim = cfg.input_dim;
      std::string orders = "0,0,1,1";
      if (root.has("dfsmn")) {
        ObjectReader d(root.get("dfsmn"), root.key_path("dfsmn"));
        opt.hidden = d.get_int("hidden", opt.hidden);
        opt.proj = d.get_int("proj", opt.proj);
        if (d.has("order")) orders = d.get_string("order");
        opt.skip = d.get_bool("skip", opt.skip);
        opt.activation = d.get_activation("activation", opt.activation);
        d.finish();
      }
      if (root.has("fc")) {
        ObjectReader f(root.get("fc"), root.key_path("fc"));
        opt.fc_hidden = f.get_int("hidden", opt.fc_hidden);
        f.finish();
      }
      const auto counts = layers.get<std::string>();
      cfg = wrap_value_error(root.key_path("layers"), [&] {
        return expand_shorthand(counts, orders, opt);
      });
    } else if (layers.is_array()) {
      for (std::size_t i = 0; i < layers.size(); ++i) {
        cfg.layers.push_back(
            read_layer(layers[i], "$.layers[" + std::to_string(i) + "]"));
      }
      cfg.output_streams = default_output_streams();
    } else {
      ObjectReader::fail(root.key_path("layers"),
                         "expected an array of layers or an \"Nc+Nd\" string");
    }
  }
  if (root.has("output_streams")) {
    cfg.output_streams =
        read_streams(root.get("output_streams"), root.key_path("output_streams"));
  }
  cfg.precision = read_precision(root, cfg.precision);
  root.finish();
  cfg.validate();
  return cfg;
}

NetworkConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_text(const NetworkConfig& cfg) {
  json doc;
  doc["input_dim"] = cfg.input_dim;
  doc["precision"] = cfg.precision == Precision::kFloat64 ? "fp64" : "fp32";
  json layers = json::array();
  for (const auto& l : cfg.layers) {
    json node;
    if (const auto* d = std::get_if<DfsmnLayerSpec>(&l)) {
      node["dfsmn"] = {{"hidden", d->hidden},
                       {"proj", d->proj},
                       {"n_back", d->memory.n_back},
                       {"n_ahead", d->memory.n_ahead},
                       {"stride_back", d->memory.stride_back},
                       {"stride_ahead", d->memory.stride_ahead},
                       {"skip", d->memory.skip},
                       {"activation", std::string(activation_name(d->activation))}};
    } else {
      const auto& f = std::get<FcLayerSpec>(l);
      node["fc"] = {{"hidden", f.hidden},
                    {"activation", std::string(activation_name(f.activation))}};
    }
    layers.push_back(std::move(node));
  }
  doc["layers"] = std::move(layers);
  json streams = json::array();
  for (const auto& s : cfg.output_streams) {
    streams.push_back({{"name", s.name},
                       {"dim", s.dim},
                       {"activation", std::string(activation_name(s.activation))}});
  }
  doc["output_streams"] = std::move(streams);
  return doc.dump(2);
}

}  // namespace dfsmn
