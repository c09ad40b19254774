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

// Single-worker minibatch SGD on the multi-task frame-level MSE.

#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfsmn/dataset.h"
#include "dfsmn/network.h"

namespace dfsmn {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  std::size_t batch_frames = 512;
  double lr = 5e-7;
  double decay_factor = 0.1;
  int patience = 1;
  double min_improvement = 0.005;  // relative validation MSE improvement
  int max_epochs = 10;
  std::uint64_t seed = 0;
  std::map<std::string, double> stream_weights;  // missing streams weigh 1.0

  void validate() const;
};

template <typename T>
struct MseResult {
  double loss = 0.0;
  StreamMap<T> grads;
};

// loss = sum_s w_s * sum (pred - target)^2 / (frames * dim_s), with `frames`
// defaulting to the prediction's frame count. Passing the batch frame total
// makes per-sequence results add up to the batch loss.
template <typename T>
MseResult<T> multitask_mse(const StreamMap<T>& pred, const StreamMap<T>& target,
                           const std::map<std::string, double>& weights = {},
                           std::size_t frames = 0);

// theta <- theta - lr * g for every scalar.
template <typename T>
void sgd_step(NetworkParams<T>& params, const NetworkParams<T>& grads, double lr,
              const NetworkConfig& cfg);

struct LrScheduleState {
  double lr = 0.0;
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
};

// Records one validation result. After `patience` consecutive evaluations
// whose relative improvement over the best so far is below
// `min_improvement`, lr is multiplied by `decay_factor` once and the counter
// resets. Returns the new lr.
double lr_schedule_step(LrScheduleState& state, double validation_mse,
                        const TrainConfig& config);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;  // rate used during this epoch
  double train_mse = 0.0;
  double valid_mse = 0.0;
};

template <typename T>
struct TrainResult {
  NetworkParams<T> params;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Frame-weighted multi-task loss over a whole dataset.
template <typename T>
double evaluate_loss(const NetworkParams<T>& params, const NetworkConfig& cfg,
                     const Dataset& data,
                     const std::map<std::string, double>& weights = {});

// Minibatches are whole sequences taken in a per-epoch seeded shuffle until
// at least batch_frames frames are collected. Validation falls back to the
// training set when `valid` is empty.
template <typename T>
TrainResult<T> train(const NetworkConfig& cfg, NetworkParams<T> params,
                     const Dataset& train_set, const Dataset& valid,
                     const TrainConfig& config,
                     const EpochCallback& on_epoch = {});

template <typename T>
StreamMap<T> predict(const NetworkParams<T>& params, const NetworkConfig& cfg,
                     const Matrix<double>& input);

}  // namespace dfsmn
