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

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dfsmn/config.h"
#include "dfsmn/tensor.h"

namespace dfsmn {

struct Sequence {
  std::string id;
  Matrix<double> input;
  std::map<std::string, Matrix<double>> targets;

  std::size_t frames() const { return input.rows(); }
};

struct Dataset {
  std::vector<Sequence> sequences;

  std::size_t total_frames() const;
  // Throws std::invalid_argument naming the stream and dims when the
  // dataset does not fit the network's input or output streams.
  void check_against(const NetworkConfig& cfg) const;
};

struct SyntheticTaskSpec {
  enum class Kind { kEcho, kAcousticToy };
  Kind kind = Kind::kEcho;
  int input_dim = 1;
  int lag = 0;  // echo only
  double noise_std = 0.0;
  int num_sequences = 64;
  int num_valid = 16;
  int seq_len = 64;
  // acoustic_toy stream sizes
  int mcep_dim = 6;
  int lf0_dim = 3;
  int bap_dim = 2;

  void validate() const;
};

inline constexpr const char* kEchoStream = "echo";

// Inputs are unit white noise; the single target stream "echo" is
// y_t = x_{t - lag} (zero for t < lag) plus optional Gaussian noise.
std::pair<Dataset, Dataset> gen_echo_task(const SyntheticTaskSpec& spec,
                                          std::uint64_t seed);

// Four-stream toy with the shape of an acoustic model target set: "mcep",
// "lf0" (static, delta, accel), "bap" and binary "uv", all smooth functions
// of a short window of the white-noise inputs.
std::pair<Dataset, Dataset> gen_acoustic_toy(const SyntheticTaskSpec& spec,
                                             std::uint64_t seed);

std::pair<Dataset, Dataset> generate_task(const SyntheticTaskSpec& spec,
                                          std::uint64_t seed);

// Output streams a network needs to fit the given synthetic task.
std::vector<StreamSpec> task_streams(const SyntheticTaskSpec& spec);

}  // namespace dfsmn
