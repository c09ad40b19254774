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

#include "dfsmn/model_io.h"

#include <fstream>

#include "binary_io.h"

namespace dfsmn {

namespace {

using Kind = ModelFormatError::Kind;

[[noreturn]] void truncated(const std::string& what) {
  throw ModelFormatError(Kind::kTruncated, "model file truncated while reading " + what);
}

template <typename T>
void read_or_truncated(std::istream& in, T& value, const char* what) {
  if (!io::read_le(in, value)) truncated(what);
}

template <typename T>
NetworkParams<T> read_tensors(std::istream& in, const NetworkConfig& cfg) {
  auto params = zero_params<T>(cfg);
  auto tensors = param_tensors(params, cfg);
  std::uint32_t count = 0;
  read_or_truncated(in, count, "tensor count");
  if (count != tensors.size()) {
    throw ModelFormatError(Kind::kCorrupt,
                           "model file holds " + std::to_string(count) +
                               " tensors, embedded config expects " +
                               std::to_string(tensors.size()));
  }
  for (auto& t : tensors) {
    std::uint32_t rows = 0, cols = 0;
    read_or_truncated(in, rows, t.name.c_str());
    read_or_truncated(in, cols, t.name.c_str());
    if (rows != t.tensor->rows() || cols != t.tensor->cols()) {
      throw ModelFormatError(
          Kind::kCorrupt, "tensor " + t.name + " stored as " +
                              Matrix<T>::shape_string(rows, cols) +
                              ", config expects " + t.tensor->shape());
    }
    for (auto& v : t.tensor->values()) read_or_truncated(in, v, t.name.c_str());
  }
  return params;
}

}  // namespace

template <typename T>
void save_model(std::ostream& out, const NetworkConfig& cfg,
                const NetworkParams<T>& params) {
  const bool is_double = std::is_same_v<T, double>;
  if (is_double != (cfg.precision == Precision::kFloat64)) {
    throw std::invalid_argument("save_model: config precision does not match "
                                "the parameter scalar type");
  }
  check_params(params, cfg);
  const auto text = config_to_text(cfg);
  out.write(kModelMagic, sizeof(kModelMagic));
  io::write_le<std::uint32_t>(out, kModelVersion);
  io::write_le<std::uint32_t>(out, sizeof(T));
  io::write_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  const auto tensors = param_tensors(params, cfg);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.tensor->rows()));
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.tensor->cols()));
    for (T v : t.tensor->values()) io::write_le(out, v);
  }
  if (!out) throw ModelFormatError(Kind::kIo, "failed writing model stream");
}

template <typename T>
void save_model(const std::filesystem::path& path, const NetworkConfig& cfg,
                const NetworkParams<T>& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw ModelFormatError(Kind::kIo, "cannot open " + path.string() + " for writing");
  }
  save_model(out, cfg, params);
}

LoadedModel load_model(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4) truncated("magic");
  if (std::memcmp(magic, kModelMagic, 4) != 0) {
    throw ModelFormatError(Kind::kBadMagic, "bad magic: not a DFSMN model file");
  }
  std::uint32_t version = 0, scalar_bytes = 0;
  read_or_truncated(in, version, "version");
  if (version != kModelVersion) {
    throw ModelFormatError(Kind::kVersionMismatch,
                           "model format version " + std::to_string(version) +
                               " is not supported (expected " +
                               std::to_string(kModelVersion) + ")");
  }
  read_or_truncated(in, scalar_bytes, "scalar width");
  std::uint64_t text_len = 0;
  read_or_truncated(in, text_len, "config length");
  std::string text;
  if (text_len > (1u << 26) || !io::read_bytes(in, text, text_len)) {
    truncated("embedded config");
  }

  LoadedModel model;
  try {
    model.config = parse_config(text);
  } catch (const ConfigError& e) {
    throw ModelFormatError(Kind::kCorrupt,
                           std::string("embedded config invalid: ") + e.what());
  }
  const bool is_double = model.config.precision == Precision::kFloat64;
  if (scalar_bytes != (is_double ? 8u : 4u)) {
    throw ModelFormatError(Kind::kCorrupt,
                           "scalar width " + std::to_string(scalar_bytes) +
                               " disagrees with embedded precision");
  }
  if (is_double) {
    model.params = read_tensors<double>(in, model.config);
  } else {
    model.params = read_tensors<float>(in, model.config);
  }
  return model;
}

LoadedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelFormatError(Kind::kIo, "cannot open model " + path.string());
  return load_model(in);
}

template void save_model(std::ostream&, const NetworkConfig&,
                         const NetworkParams<float>&);
template void save_model(std::ostream&, const NetworkConfig&,
                         const NetworkParams<double>&);
template void save_model(const std::filesystem::path&, const NetworkConfig&,
                         const NetworkParams<float>&);
template void save_model(const std::filesystem::path&, const NetworkConfig&,
                         const NetworkParams<double>&);

}  // namespace dfsmn
