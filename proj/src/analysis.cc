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

#include "dfsmn/analysis.h"

#include <cstdio>
#include <sstream>

#include "dfsmn/network.h"
#include "json.hpp"

namespace dfsmn {

namespace {

std::uint64_t affine_flops(std::uint64_t d_in, std::uint64_t d_out) {
  return 2 * d_in * d_out + d_out;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

ReceptiveField receptive_field(const NetworkConfig& cfg) {
  ReceptiveField rf;
  for (const auto& l : cfg.layers) {
    if (const auto* d = std::get_if<DfsmnLayerSpec>(&l)) {
      rf.back_frames += static_cast<std::int64_t>(d->memory.n_back) * d->memory.stride_back;
      rf.ahead_frames += static_cast<std::int64_t>(d->memory.n_ahead) * d->memory.stride_ahead;
    }
  }
  return rf;
}

std::uint64_t flops_per_frame(const NetworkConfig& cfg) {
  cfg.validate();
  std::uint64_t total = 0;
  std::uint64_t d_in = static_cast<std::uint64_t>(cfg.input_dim);
  for (const auto& l : cfg.layers) {
    if (const auto* d = std::get_if<DfsmnLayerSpec>(&l)) {
      const std::uint64_t proj = d->proj, hidden = d->hidden;
      const std::uint64_t taps =
          static_cast<std::uint64_t>(d->memory.n_back + 1 + d->memory.n_ahead);
      total += affine_flops(d_in, proj);
      total += 2 * taps * proj;
      total += affine_flops(proj, hidden) + hidden;  // + activation
      d_in = hidden;
    } else {
      const std::uint64_t hidden = std::get<FcLayerSpec>(l).hidden;
      total += affine_flops(d_in, hidden) + hidden;
      d_in = hidden;
    }
  }
  for (const auto& s : cfg.output_streams) {
    const std::uint64_t dim = static_cast<std::uint64_t>(s.dim);
    total += affine_flops(d_in, dim) + dim;
  }
  return total;
}

const std::vector<PublishedCost>& published_costs() {
  static const std::vector<PublishedCost> rows = {
      {"BLSTM", 295, 21.09}, {"A", 62, 4.08},  {"B", 62, 4.08},
      {"C", 62, 4.08},       {"D", 62, 4.09},  {"E", 87, 5.35},
      {"F", 119, 7.04},      {"G", 119, 7.06}, {"H", 120, 7.10},
      {"I", 122, 7.18},
  };
  return rows;
}

std::optional<PublishedCost> published_cost(const std::string& name) {
  for (const auto& r : published_costs())
    if (r.name == name) return r;
  return std::nullopt;
}

CostReport cost_report(const std::string& name, const NetworkConfig& cfg) {
  CostReport r;
  r.name = name;
  const auto rf = receptive_field(cfg);
  r.look_back_frames = rf.back_frames;
  r.look_ahead_frames = rf.ahead_frames;
  r.look_back_ms = static_cast<double>(rf.back_frames) * kFrameShiftMs;
  r.look_ahead_ms = static_cast<double>(rf.ahead_frames) * kFrameShiftMs;
  r.param_count = count_params(cfg);
  r.size_mb = static_cast<double>(r.param_count) * kBytesPerParam / (1024.0 * 1024.0);
  r.flops_per_frame = flops_per_frame(cfg);
  r.gflops_per_second = static_cast<double>(r.flops_per_frame) * kFramesPerSecond / 1e9;
  r.published = published_cost(name);
  return r;
}

std::vector<CostReport> table_report(const std::vector<std::string>& presets) {
  std::vector<CostReport> rows;
  for (const auto& name : presets) rows.push_back(cost_report(name, preset_config(name)));
  return rows;
}

std::string format_table(const std::vector<CostReport>& rows) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-6s %6s %6s %8s %8s %12s %9s %14s %9s | %12s %12s\n",
                "ID", "back", "ahead", "back_ms", "ahead_ms", "params", "size_mb",
                "flops/frame", "GFLOPS/s", "pub_size_mb", "pub_GFLOPS/s");
  out << line;
  for (const auto& r : rows) {
    const std::string pub_size = r.published ? fixed(r.published->size_mb, 0) : "-";
    const std::string pub_flops = r.published ? fixed(r.published->gflops, 2) : "-";
    std::snprintf(line, sizeof(line),
                  "%-6s %6lld %6lld %8.0f %8.0f %12llu %9.2f %14llu %9.3f | %12s %12s\n",
                  r.name.c_str(), static_cast<long long>(r.look_back_frames),
                  static_cast<long long>(r.look_ahead_frames), r.look_back_ms,
                  r.look_ahead_ms, static_cast<unsigned long long>(r.param_count),
                  r.size_mb, static_cast<unsigned long long>(r.flops_per_frame),
                  r.gflops_per_second, pub_size.c_str(), pub_flops.c_str());
    out << line;
  }
  out << "(pub_* columns are published reference values, not computed)\n";
  return out.str();
}

std::string format_records(const std::vector<CostReport>& rows) {
  std::ostringstream out;
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["id"] = r.name;
    j["look_back_frames"] = r.look_back_frames;
    j["look_ahead_frames"] = r.look_ahead_frames;
    j["look_back_ms"] = r.look_back_ms;
    j["look_ahead_ms"] = r.look_ahead_ms;
    j["param_count"] = r.param_count;
    j["size_mb"] = r.size_mb;
    j["flops_per_frame"] = r.flops_per_frame;
    j["gflops_per_second"] = r.gflops_per_second;
    if (r.published) {
      j["published_size_mb"] = r.published->size_mb;
      j["published_gflops"] = r.published->gflops;
    }
    out << j.dump() << "\n";
  }
  return out.str();
}

}  // namespace dfsmn
