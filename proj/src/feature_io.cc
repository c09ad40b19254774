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

#include "dfsmn/feature_io.h"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "binary_io.h"

namespace dfsmn {

namespace fs = std::filesystem;

namespace {

using Kind = FeatureFormatError::Kind;

template <typename T>
void read_field(std::istream& in, T& v, const char* what) {
  if (!io::read_le(in, v)) {
    throw FeatureFormatError(Kind::kTruncated,
                             std::string("feature file truncated reading ") + what);
  }
}

constexpr const char* kFeatureExt = ".feat";

}  // namespace

fs::path feature_path(const fs::path& dir, const std::string& id,
                      const std::string& stream) {
  return dir / (id + "." + stream + kFeatureExt);
}

void write_feature_file(std::ostream& out, const std::string& stream,
                        const Matrix<float>& data) {
  out.write(kFeatureMagic, sizeof(kFeatureMagic));
  io::write_le<std::uint32_t>(out, kFeatureVersion);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.rows()));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.cols()));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(stream.size()));
  out.write(stream.data(), static_cast<std::streamsize>(stream.size()));
  for (float v : data.values()) io::write_le(out, v);
  if (!out) throw FeatureFormatError(Kind::kIo, "failed writing feature stream");
}

void write_feature_file(const fs::path& path, const std::string& stream,
                        const Matrix<float>& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw FeatureFormatError(Kind::kIo, "cannot open " + path.string() + " for writing");
  }
  write_feature_file(out, stream, data);
}

FeatureFile read_feature_file(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4) throw FeatureFormatError(Kind::kTruncated, "feature file truncated");
  if (!std::equal(magic, magic + 4, kFeatureMagic)) {
    throw FeatureFormatError(Kind::kBadMagic, "bad magic: not a feature file");
  }
  std::uint32_t version = 0, frames = 0, dim = 0, name_len = 0;
  read_field(in, version, "version");
  if (version != kFeatureVersion) {
    throw FeatureFormatError(Kind::kVersionMismatch,
                             "feature file version " + std::to_string(version) +
                                 " is not supported");
  }
  read_field(in, frames, "frame count");
  read_field(in, dim, "dim");
  read_field(in, name_len, "name length");
  FeatureFile f;
  if (name_len > 4096 || !io::read_bytes(in, f.stream, name_len)) {
    throw FeatureFormatError(Kind::kTruncated, "feature file truncated in stream name");
  }
  f.data = Matrix<float>(frames, dim);
  for (auto& v : f.data.values()) read_field(in, v, "payload");
  return f;
}

FeatureFile read_feature_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FeatureFormatError(Kind::kIo, "cannot open " + path.string());
  try {
    return read_feature_file(in);
  } catch (const FeatureFormatError& e) {
    throw FeatureFormatError(e.kind(), path.string() + ": " + e.what());
  }
}

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FeatureFormatError(Kind::kIo, "cannot write " + path.string());
  for (const auto& e : entries) out << e.id << '\t' << e.frames << '\n';
  if (!out) throw FeatureFormatError(Kind::kIo, "failed writing " + path.string());
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FeatureFormatError(Kind::kIo, "cannot open manifest " + path.string());
  std::vector<ManifestEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    ManifestEntry e;
    e.id = line.substr(0, tab);
    bool ok = tab != std::string::npos && !e.id.empty();
    if (ok) {
      std::istringstream num(line.substr(tab + 1));
      ok = static_cast<bool>(num >> e.frames) && num.eof();
    }
    if (!ok) {
      throw FeatureFormatError(Kind::kInconsistent,
                               path.string() + ":" + std::to_string(line_no) +
                                   ": expected 'id<TAB>frames'");
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_dataset_dir(const fs::path& dir, const Dataset& data) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw FeatureFormatError(Kind::kIo, "cannot create " + dir.string() + ": " + ec.message());
  std::vector<ManifestEntry> manifest;
  for (const auto& s : data.sequences) {
    if (s.id.find('.') != std::string::npos || s.id.find('/') != std::string::npos) {
      throw std::invalid_argument("sequence id '" + s.id + "' may not contain '.' or '/'");
    }
    write_feature_file(feature_path(dir, s.id, kInputStream), kInputStream,
                       s.input.cast<float>());
    for (const auto& [name, m] : s.targets) {
      write_feature_file(feature_path(dir, s.id, name), name, m.cast<float>());
    }
    manifest.push_back({s.id, s.frames()});
  }
  write_manifest(dir / kManifestName, manifest);
}

Dataset read_dataset_dir(const fs::path& dir) {
  const auto manifest = read_manifest(dir / kManifestName);
  // Group feature files by sequence id: "<id>.<stream>.feat".
  std::map<std::string, std::vector<std::string>> streams_by_id;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != kFeatureExt) continue;
    const auto stem = entry.path().stem().string();
    const auto dot = stem.find('.');
    if (dot == std::string::npos) continue;
    streams_by_id[stem.substr(0, dot)].push_back(stem.substr(dot + 1));
  }
  Dataset data;
  for (const auto& e : manifest) {
    Sequence s;
    s.id = e.id;
    auto& streams = streams_by_id[e.id];
    std::sort(streams.begin(), streams.end());
    bool have_input = false;
    for (const auto& name : streams) {
      auto f = read_feature_file(feature_path(dir, e.id, name));
      if (f.stream != name) {
        throw FeatureFormatError(Kind::kInconsistent,
                                 "file for stream '" + name + "' of '" + e.id +
                                     "' declares stream '" + f.stream + "'");
      }
      if (f.data.rows() != e.frames) {
        throw FeatureFormatError(Kind::kInconsistent,
                                 "'" + e.id + "." + name + "' has " +
                                     std::to_string(f.data.rows()) +
                                     " frames, manifest says " + std::to_string(e.frames));
      }
      if (name == kInputStream) {
        s.input = f.data.cast<double>();
        have_input = true;
      } else {
        s.targets.emplace(name, f.data.cast<double>());
      }
    }
    if (!have_input) {
      throw FeatureFormatError(Kind::kInconsistent,
                               "sequence '" + e.id + "' has no input feature file");
    }
    data.sequences.push_back(std::move(s));
  }
  return data;
}

}  // namespace dfsmn
