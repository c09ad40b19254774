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

#include "dfsmn/trainer.h"

#include <cmath>
#include <numeric>

namespace dfsmn {

namespace {

template <typename T>
struct TypedSequence {
  Matrix<T> input;
  StreamMap<T> targets;
};

template <typename T>
std::vector<TypedSequence<T>> to_typed(const Dataset& data) {
  std::vector<TypedSequence<T>> out;
  out.reserve(data.sequences.size());
  for (const auto& s : data.sequences) {
    TypedSequence<T> ts;
    ts.input = s.input.template cast<T>();
    for (const auto& [name, m] : s.targets) ts.targets.emplace(name, m.template cast<T>());
    out.push_back(std::move(ts));
  }
  return out;
}

// Keeps only the streams the network produces.
template <typename T>
StreamMap<T> select_streams(const StreamMap<T>& all, const NetworkConfig& cfg) {
  StreamMap<T> out;
  for (const auto& s : cfg.output_streams) out.emplace(s.name, all.at(s.name));
  return out;
}

template <typename T>
double typed_loss(const NetworkParams<T>& params, const NetworkConfig& cfg,
                  const std::vector<TypedSequence<T>>& data,
                  const std::map<std::string, double>& weights) {
  double weighted = 0.0;
  std::size_t frames = 0;
  for (const auto& s : data) {
    const auto fwd = forward(params, cfg, s.input);
    const auto r = multitask_mse(fwd.outputs, select_streams(s.targets, cfg), weights);
    weighted += r.loss * static_cast<double>(s.input.rows());
    frames += s.input.rows();
  }
  return frames == 0 ? 0.0 : weighted / static_cast<double>(frames);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr))
    throw std::invalid_argument("learning rate must be finite and >= 0");
  if (!(decay_factor > 0.0 && decay_factor < 1.0))
    throw std::invalid_argument("decay_factor must lie in (0, 1)");
  if (batch_frames < 1) throw std::invalid_argument("batch_frames must be >= 1");
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (max_epochs < 0) throw std::invalid_argument("max_epochs must be >= 0");
}

template <typename T>
MseResult<T> multitask_mse(const StreamMap<T>& pred, const StreamMap<T>& target,
                           const std::map<std::string, double>& weights,
                           std::size_t frames) {
  if (pred.size() != target.size()) {
    throw std::invalid_argument("multitask_mse: prediction has " +
                                std::to_string(pred.size()) + " streams, target " +
                                std::to_string(target.size()));
  }
  MseResult<T> result;
  for (const auto& [name, p] : pred) {
    const auto it = target.find(name);
    if (it == target.end()) {
      throw std::invalid_argument("multitask_mse: target lacks stream '" + name + "'");
    }
    const auto& t = it->second;
    if (!p.same_shape(t)) {
      throw ShapeError("multitask_mse: stream '" + name + "' prediction " +
                       p.shape() + " vs target " + t.shape());
    }
    const auto w_it = weights.find(name);
    const double w = w_it == weights.end() ? 1.0 : w_it->second;
    const double n = static_cast<double>(frames == 0 ? p.rows() : frames) *
                     static_cast<double>(p.cols());
    Matrix<T> g(p.rows(), p.cols());
    double sq = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double e = static_cast<double>(p[i]) - static_cast<double>(t[i]);
      sq += e * e;
      g[i] = static_cast<T>(2.0 * w * e / n);
    }
    result.loss += w * sq / n;
    result.grads.emplace(name, std::move(g));
  }
  return result;
}

template <typename T>
void sgd_step(NetworkParams<T>& params, const NetworkParams<T>& grads, double lr,
              const NetworkConfig& cfg) {
  auto p = param_tensors(params, cfg);
  const auto g = param_tensors(grads, cfg);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!p[i].tensor->same_shape(*g[i].tensor)) {
      throw ShapeError("sgd_step: gradient " + g[i].tensor->shape() +
                       " does not match parameter " + p[i].name + " " +
                       p[i].tensor->shape());
    }
    auto values = p[i].tensor->values();
    const auto gv = g[i].tensor->values();
    for (std::size_t k = 0; k < values.size(); ++k)
      values[k] -= static_cast<T>(lr) * gv[k];
  }
}

double lr_schedule_step(LrScheduleState& state, double validation_mse,
                        const TrainConfig& config) {
  if (!std::isfinite(state.best)) {
    state.best = validation_mse;
    return state.lr;
  }
  const double improvement =
      state.best > 0.0 ? (state.best - validation_mse) / state.best : 0.0;
  if (improvement >= config.min_improvement && validation_mse < state.best) {
    state.best = validation_mse;
    state.stale = 0;
    return state.lr;
  }
  if (validation_mse < state.best) state.best = validation_mse;
  if (++state.stale >= config.patience) {
    state.lr *= config.decay_factor;
    state.stale = 0;
  }
  return state.lr;
}

template <typename T>
double evaluate_loss(const NetworkParams<T>& params, const NetworkConfig& cfg,
                     const Dataset& data,
                     const std::map<std::string, double>& weights) {
  data.check_against(cfg);
  return typed_loss(params, cfg, to_typed<T>(data), weights);
}

template <typename T>
TrainResult<T> train(const NetworkConfig& cfg, NetworkParams<T> params,
                     const Dataset& train_set, const Dataset& valid,
                     const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.sequences.empty()) throw TrainingError("training set is empty");
  train_set.check_against(cfg);
  valid.check_against(cfg);
  check_params(params, cfg);

  const auto train_data = to_typed<T>(train_set);
  const auto valid_data = valid.sequences.empty() ? train_data : to_typed<T>(valid);

  TrainResult<T> result;
  LrScheduleState schedule;
  schedule.lr = config.lr;

  std::vector<std::size_t> order(train_data.size());
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order.begin(), order.end());

    double epoch_weighted = 0.0;
    std::size_t epoch_frames = 0;
    std::size_t pos = 0;
    int batch_index = 0;
    while (pos < order.size()) {
      std::size_t end = pos, batch_frames = 0;
      while (end < order.size() && batch_frames < config.batch_frames) {
        batch_frames += train_data[order[end]].input.rows();
        ++end;
      }
      auto grads = zero_params<T>(cfg);
      double batch_loss = 0.0;
      for (std::size_t k = pos; k < end; ++k) {
        const auto& s = train_data[order[k]];
        const auto fwd = forward(params, cfg, s.input);
        auto mse = multitask_mse(fwd.outputs, select_streams(s.targets, cfg),
                                 config.stream_weights, batch_frames);
        batch_loss += mse.loss;
        const auto g = backward(params, cfg, fwd.cache, mse.grads);
        accumulate(grads, g.params, T(1), cfg);
      }
      if (!std::isfinite(batch_loss)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) +
                            ", batch " + std::to_string(batch_index));
      }
      sgd_step(params, grads, schedule.lr, cfg);
      epoch_weighted += batch_loss * static_cast<double>(batch_frames);
      epoch_frames += batch_frames;
      pos = end;
      ++batch_index;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = schedule.lr;
    rec.train_mse = epoch_weighted / static_cast<double>(epoch_frames);
    rec.valid_mse = typed_loss(params, cfg, valid_data, config.stream_weights);
    if (!std::isfinite(rec.valid_mse)) {
      throw TrainingError("non-finite validation loss at epoch " +
                          std::to_string(epoch));
    }
    lr_schedule_step(schedule, rec.valid_mse, config);
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  result.params = std::move(params);
  return result;
}

template <typename T>
StreamMap<T> predict(const NetworkParams<T>& params, const NetworkConfig& cfg,
                     const Matrix<double>& input) {
  return forward(params, cfg, input.template cast<T>()).outputs;
}

#define DFSMN_INSTANTIATE_TRAINER(T)                                           \
  template MseResult<T> multitask_mse(const StreamMap<T>&, const StreamMap<T>&, \
                                      const std::map<std::string, double>&,     \
                                      std::size_t);                             \
  template void sgd_step(NetworkParams<T>&, const NetworkParams<T>&, double,    \
                         const NetworkConfig&);                                 \
  template double evaluate_loss(const NetworkParams<T>&, const NetworkConfig&,  \
                                const Dataset&,                                 \
                                const std::map<std::string, double>&);          \
  template TrainResult<T> train(const NetworkConfig&, NetworkParams<T>,         \
                                const Dataset&, const Dataset&,                 \
                                const TrainConfig&, const EpochCallback&);      \
  template StreamMap<T> predict(const NetworkParams<T>&, const NetworkConfig&,  \
                                const Matrix<double>&);

DFSMN_INSTANTIATE_TRAINER(float)
DFSMN_INSTANTIATE_TRAINER(double)

#undef DFSMN_INSTANTIATE_TRAINER

}  // namespace dfsmn
