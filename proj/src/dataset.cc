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

#include "dfsmn/dataset.h"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace dfsmn {

namespace {

std::string sequence_id(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%05d", prefix, i);
  return buf;
}

Sequence make_echo_sequence(const SyntheticTaskSpec& spec, Rng& rng,
                            std::string id) {
  const auto T = static_cast<std::size_t>(spec.seq_len);
  const auto D = static_cast<std::size_t>(spec.input_dim);
  const auto lag = static_cast<std::size_t>(spec.lag);
  Sequence s;
  s.id = std::move(id);
  s.input = Matrix<double>(T, D);
  for (auto& v : s.input.values()) v = rng.normal();
  Matrix<double> y(T, D);
  for (std::size_t t = lag; t < T; ++t)
    for (std::size_t k = 0; k < D; ++k) y(t, k) = s.input(t - lag, k);
  if (spec.noise_std > 0) {
    for (auto& v : y.values()) v += spec.noise_std * rng.normal();
  }
  s.targets.emplace(kEchoStream, std::move(y));
  return s;
}

// Fixed random mixing shared by all sequences of one acoustic toy task.
struct ToyTeacher {
  Matrix<double> mix;  // input_dim x 12 latent channels
};

Sequence make_toy_sequence(const SyntheticTaskSpec& spec, const ToyTeacher& teacher,
                           Rng& rng, std::string id) {
  const auto T = static_cast<std::size_t>(spec.seq_len);
  const auto D = static_cast<std::size_t>(spec.input_dim);
  Sequence s;
  s.id = std::move(id);
  s.input = Matrix<double>(T, D);
  for (auto& v : s.input.values()) v = rng.normal();

  // Latent channels: +-2 frame triangular smoothing of a random projection.
  const auto raw = matmul(s.input, teacher.mix);
  const std::size_t L = raw.cols();
  Matrix<double> latent(T, L);
  const double w[5] = {1, 2, 3, 2, 1};
  for (std::size_t t = 0; t < T; ++t) {
    for (int o = -2; o <= 2; ++o) {
      const auto src = static_cast<std::ptrdiff_t>(t) + o;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
      for (std::size_t k = 0; k < L; ++k)
        latent(t, k) += w[o + 2] / 9.0 * raw(static_cast<std::size_t>(src), k);
    }
  }

  const auto mcep_dim = static_cast<std::size_t>(spec.mcep_dim);
  const auto bap_dim = static_cast<std::size_t>(spec.bap_dim);
  const auto lf0_dim = static_cast<std::size_t>(spec.lf0_dim);
  Matrix<double> mcep(T, mcep_dim), bap(T, bap_dim), lf0(T, lf0_dim), uv(T, 1);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < mcep_dim; ++k)
      mcep(t, k) = std::tanh(latent(t, k % L));
    for (std::size_t k = 0; k < bap_dim; ++k)
      bap(t, k) = std::tanh(latent(t, (mcep_dim + k) % L));
    lf0(t, 0) = 0.5 * latent(t, (mcep_dim + bap_dim) % L);
    uv(t, 0) = latent(t, (mcep_dim + bap_dim + 1) % L) > 0.0 ? 1.0 : 0.0;
  }
  // Dynamic features of the static log-F0 track: centred first and second
  // differences, edges clamped.
  auto stat = [&](std::ptrdiff_t t) {
    t = std::clamp<std::ptrdiff_t>(t, 0, static_cast<std::ptrdiff_t>(T) - 1);
    return lf0(static_cast<std::size_t>(t), 0);
  };
  for (std::size_t t = 0; t < T; ++t) {
    const auto st = static_cast<std::ptrdiff_t>(t);
    if (lf0_dim > 1) lf0(t, 1) = 0.5 * (stat(st + 1) - stat(st - 1));
    if (lf0_dim > 2) lf0(t, 2) = stat(st + 1) - 2.0 * stat(st) + stat(st - 1);
  }
  s.targets.emplace("mcep", std::move(mcep));
  s.targets.emplace("lf0", std::move(lf0));
  s.targets.emplace("bap", std::move(bap));
  s.targets.emplace("uv", std::move(uv));
  return s;
}

}  // namespace

std::size_t Dataset::total_frames() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.frames();
  return n;
}

void Dataset::check_against(const NetworkConfig& cfg) const {
  for (const auto& s : sequences) {
    if (s.input.cols() != static_cast<std::size_t>(cfg.input_dim)) {
      throw std::invalid_argument(
          "sequence '" + s.id + "': stream 'input' has dim " +
          std::to_string(s.input.cols()) + ", network expects " +
          std::to_string(cfg.input_dim));
    }
    for (const auto& stream : cfg.output_streams) {
      const auto it = s.targets.find(stream.name);
      if (it == s.targets.end()) {
        throw std::invalid_argument("sequence '" + s.id + "': missing stream '" +
                                    stream.name + "' (dim " +
                                    std::to_string(stream.dim) + ")");
      }
      if (it->second.cols() != static_cast<std::size_t>(stream.dim) ||
          it->second.rows() != s.frames()) {
        throw std::invalid_argument(
            "sequence '" + s.id + "': stream '" + stream.name + "' has shape " +
            it->second.shape() + ", network expects " +
            Matrix<double>::shape_string(s.frames(), stream.dim));
      }
    }
  }
}

void SyntheticTaskSpec::validate() const {
  if (input_dim < 1) throw std::invalid_argument("input_dim must be >= 1");
  if (seq_len < 1) throw std::invalid_argument("seq_len must be >= 1");
  if (num_sequences < 1) throw std::invalid_argument("num_sequences must be >= 1");
  if (num_valid < 0) throw std::invalid_argument("num_valid must be >= 0");
  if (noise_std < 0) throw std::invalid_argument("noise_std must be >= 0");
  if (kind == Kind::kEcho && (lag < 0 || lag >= seq_len)) {
    throw std::invalid_argument("echo lag must satisfy 0 <= lag < seq_len");
  }
  if (kind == Kind::kAcousticToy &&
      (mcep_dim < 1 || lf0_dim < 1 || bap_dim < 1)) {
    throw std::invalid_argument("acoustic_toy stream dims must be >= 1");
  }
}

std::pair<Dataset, Dataset> gen_echo_task(const SyntheticTaskSpec& spec,
                                          std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  std::pair<Dataset, Dataset> out;
  for (int i = 0; i < spec.num_sequences; ++i)
    out.first.sequences.push_back(make_echo_sequence(spec, rng, sequence_id("train", i)));
  for (int i = 0; i < spec.num_valid; ++i)
    out.second.sequences.push_back(make_echo_sequence(spec, rng, sequence_id("valid", i)));
  return out;
}

std::pair<Dataset, Dataset> gen_acoustic_toy(const SyntheticTaskSpec& spec,
                                             std::uint64_t seed) {
  spec.validate();
  ToyTeacher teacher;
  teacher.mix = seeded_normal<double>(derive_seed(seed, 1),
                                      static_cast<std::size_t>(spec.input_dim), 12,
                                      0.0, 1.0 / std::sqrt(spec.input_dim));
  Rng rng(derive_seed(seed, 2));
  std::pair<Dataset, Dataset> out;
  for (int i = 0; i < spec.num_sequences; ++i)
    out.first.sequences.push_back(
        make_toy_sequence(spec, teacher, rng, sequence_id("train", i)));
  for (int i = 0; i < spec.num_valid; ++i)
    out.second.sequences.push_back(
        make_toy_sequence(spec, teacher, rng, sequence_id("valid", i)));
  return out;
}

std::pair<Dataset, Dataset> generate_task(const SyntheticTaskSpec& spec,
                                          std::uint64_t seed) {
  return spec.kind == SyntheticTaskSpec::Kind::kEcho ? gen_echo_task(spec, seed)
                                                     : gen_acoustic_toy(spec, seed);
}

std::vector<StreamSpec> task_streams(const SyntheticTaskSpec& spec) {
  if (spec.kind == SyntheticTaskSpec::Kind::kEcho) {
    return {{kEchoStream, spec.input_dim, Activation::kLinear}};
  }
  return {{"mcep", spec.mcep_dim, Activation::kLinear},
          {"lf0", spec.lf0_dim, Activation::kLinear},
          {"bap", spec.bap_dim, Activation::kLinear},
          {"uv", 1, Activation::kSigmoid}};
}

}  // namespace dfsmn
