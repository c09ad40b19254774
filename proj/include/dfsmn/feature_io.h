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

// Feature files and dataset directories.
//
// Feature file (little-endian):
//   "DFSF" | u32 version | u32 frames T | u32 dim D | u32 name length |
//   stream name bytes | T*D fp32 payload, row-major
//
// Dataset directory:
//   manifest.txt             one "id<TAB>frames" line per sequence
//   <id>.<stream>.feat       one feature file per sequence per stream; the
//                            network input stream is called "input"

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfsmn/dataset.h"
#include "dfsmn/tensor.h"

namespace dfsmn {

inline constexpr char kFeatureMagic[4] = {'D', 'F', 'S', 'F'};
inline constexpr std::uint32_t kFeatureVersion = 1;
inline constexpr const char* kInputStream = "input";
inline constexpr const char* kManifestName = "manifest.txt";

class FeatureFormatError : public std::runtime_error {
 public:
  enum class Kind { kBadMagic, kVersionMismatch, kTruncated, kIo, kInconsistent };
  FeatureFormatError(Kind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct FeatureFile {
  std::string stream;
  Matrix<float> data;
};

void write_feature_file(std::ostream& out, const std::string& stream,
                        const Matrix<float>& data);
void write_feature_file(const std::filesystem::path& path, const std::string& stream,
                        const Matrix<float>& data);
FeatureFile read_feature_file(std::istream& in);
FeatureFile read_feature_file(const std::filesystem::path& path);

struct ManifestEntry {
  std::string id;
  std::size_t frames = 0;
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

void write_manifest(const std::filesystem::path& path,
                    const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

// Values are stored as fp32.
void write_dataset_dir(const std::filesystem::path& dir, const Dataset& data);
// Throws FeatureFormatError when a file disagrees with the manifest.
Dataset read_dataset_dir(const std::filesystem::path& dir);

std::filesystem::path feature_path(const std::filesystem::path& dir,
                                   const std::string& id, const std::string& stream);

}  // namespace dfsmn
