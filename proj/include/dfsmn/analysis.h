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

// Static cost analysis of a network config: temporal context, parameter
// footprint and arithmetic per generated second of speech.
//
// FLOP convention: an m x k by k x n product costs 2*k*n per frame
// (multiply-add = 2), a memory block costs 2*(N1+1+N2)*proj, and every bias
// add and activation costs 1 per scalar (linear outputs included).

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dfsmn/config.h"

namespace dfsmn {

inline constexpr double kFrameShiftMs = 5.0;
inline constexpr double kFramesPerSecond = 200.0;
inline constexpr int kBytesPerParam = 4;

struct ReceptiveField {
  std::int64_t back_frames = 0;
  std::int64_t ahead_frames = 0;
  friend bool operator==(const ReceptiveField&, const ReceptiveField&) = default;
};

// Sum over DFSMN layers of order * stride, per side.
ReceptiveField receptive_field(const NetworkConfig& cfg);

std::uint64_t flops_per_frame(const NetworkConfig& cfg);

// Published size (MB) and GFLOPS per second of speech for a named system.
struct PublishedCost {
  std::string name;
  double size_mb;
  double gflops;
};

// Reference rows BLSTM, A..I.
const std::vector<PublishedCost>& published_costs();
std::optional<PublishedCost> published_cost(const std::string& name);

struct CostReport {
  std::string name;
  std::int64_t look_back_frames = 0;
  std::int64_t look_ahead_frames = 0;
  double look_back_ms = 0;
  double look_ahead_ms = 0;
  std::uint64_t param_count = 0;
  double size_mb = 0;
  std::uint64_t flops_per_frame = 0;
  double gflops_per_second = 0;
  std::optional<PublishedCost> published;
};

CostReport cost_report(const std::string& name, const NetworkConfig& cfg);

// Reports for named presets, in the given order. Throws ConfigError on an
// unknown preset name.
std::vector<CostReport> table_report(const std::vector<std::string>& presets);

// Aligned text table; published reference values appear in their own
// clearly labelled columns.
std::string format_table(const std::vector<CostReport>& rows);

// One JSON object per line, one line per report.
std::string format_records(const std::vector<CostReport>& rows);

}  // namespace dfsmn
