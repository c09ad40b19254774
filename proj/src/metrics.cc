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

#include "dfsmn/metrics.h"

#include <cmath>
#include <numbers>

namespace dfsmn {

namespace {

void require_frames(const Matrix<double>& a, const Matrix<double>& b,
                    const char* what) {
  if (a.rows() != b.rows()) {
    throw MetricError(std::string(what) + ": frame count mismatch (" +
                      std::to_string(a.rows()) + " vs " +
                      std::to_string(b.rows()) + ")");
  }
}

void require_shape(const Matrix<double>& a, const Matrix<double>& b,
                   const char* what) {
  require_frames(a, b, what);
  if (a.cols() != b.cols()) {
    throw MetricError(std::string(what) + ": dimension mismatch " + a.shape() +
                      " vs " + b.shape());
  }
}

bool voiced(double flag, double threshold = 0.5) { return flag >= threshold; }

}  // namespace

NormStats fit_norm(std::span<const Matrix<double>> sequences) {
  if (sequences.empty()) throw MetricError("fit_norm: no sequences");
  const std::size_t dim = sequences.front().cols();
  std::size_t frames = 0;
  std::vector<double> sum(dim, 0.0);
  for (const auto& s : sequences) {
    if (s.cols() != dim) {
      throw MetricError("fit_norm: sequences disagree on dimension");
    }
    frames += s.rows();
    for (std::size_t t = 0; t < s.rows(); ++t)
      for (std::size_t k = 0; k < dim; ++k) sum[k] += s(t, k);
  }
  if (frames < 2) throw MetricError("fit_norm: need at least two frames");

  NormStats stats;
  stats.mean.resize(dim);
  stats.std.resize(dim);
  stats.floored.assign(dim, false);
  for (std::size_t k = 0; k < dim; ++k) stats.mean[k] = sum[k] / frames;
  std::vector<double> sq(dim, 0.0);
  for (const auto& s : sequences)
    for (std::size_t t = 0; t < s.rows(); ++t)
      for (std::size_t k = 0; k < dim; ++k) {
        const double e = s(t, k) - stats.mean[k];
        sq[k] += e * e;
      }
  for (std::size_t k = 0; k < dim; ++k) {
    const double sd = std::sqrt(sq[k] / frames);
    if (sd < kStdFloor) {
      stats.std[k] = kStdFloor;
      stats.floored[k] = true;
    } else {
      stats.std[k] = sd;
    }
  }
  return stats;
}

Matrix<double> apply_norm(const NormStats& stats, const Matrix<double>& x) {
  if (x.cols() != stats.mean.size())
    throw MetricError("apply_norm: dimension mismatch");
  Matrix<double> y(x.rows(), x.cols());
  for (std::size_t t = 0; t < x.rows(); ++t)
    for (std::size_t k = 0; k < x.cols(); ++k)
      y(t, k) = (x(t, k) - stats.mean[k]) / stats.std[k];
  return y;
}

Matrix<double> invert_norm(const NormStats& stats, const Matrix<double>& x) {
  if (x.cols() != stats.mean.size())
    throw MetricError("invert_norm: dimension mismatch");
  Matrix<double> y(x.rows(), x.cols());
  for (std::size_t t = 0; t < x.rows(); ++t)
    for (std::size_t k = 0; k < x.cols(); ++k)
      y(t, k) = x(t, k) * stats.std[k] + stats.mean[k];
  return y;
}

Matrix<double> interpolate_f0(const Matrix<double>& f0, const Matrix<double>& uv) {
  require_frames(f0, uv, "interpolate_f0");
  const std::size_t n = f0.rows();
  std::vector<std::size_t> voiced_idx;
  for (std::size_t t = 0; t < n; ++t)
    if (voiced(uv[t * uv.cols()])) voiced_idx.push_back(t);
  if (voiced_idx.empty()) {
    throw MetricError("interpolate_f0: sequence has no voiced frame");
  }
  Matrix<double> out(n, 1);
  auto at = [&](std::size_t t) { return f0[t * f0.cols()]; };
  for (std::size_t t = 0; t <= voiced_idx.front(); ++t) out[t] = at(voiced_idx.front());
  for (std::size_t v = 0; v + 1 < voiced_idx.size(); ++v) {
    const std::size_t lo = voiced_idx[v], hi = voiced_idx[v + 1];
    out[lo] = at(lo);
    for (std::size_t t = lo + 1; t < hi; ++t) {
      const double w = static_cast<double>(t - lo) / static_cast<double>(hi - lo);
      out[t] = at(lo) + w * (at(hi) - at(lo));
    }
  }
  for (std::size_t t = voiced_idx.back(); t < n; ++t) out[t] = at(voiced_idx.back());
  return out;
}

double mcd(const Matrix<double>& ref_mcep, const Matrix<double>& hyp_mcep) {
  require_shape(ref_mcep, hyp_mcep, "mcd");
  if (ref_mcep.rows() == 0) throw MetricError("mcd: empty sequence");
  const double scale = 10.0 / std::numbers::ln10;
  double total = 0.0;
  for (std::size_t t = 0; t < ref_mcep.rows(); ++t) {
    double sq = 0.0;
    for (std::size_t i = 1; i < ref_mcep.cols(); ++i) {
      const double e = ref_mcep(t, i) - hyp_mcep(t, i);
      sq += e * e;
    }
    total += scale * std::sqrt(2.0 * sq);
  }
  return total / static_cast<double>(ref_mcep.rows());
}

double f0_rmse(const Matrix<double>& ref_f0_hz, const Matrix<double>& hyp_lf0,
               const Matrix<double>& ref_uv, const Matrix<double>& hyp_uv,
               double threshold) {
  require_frames(ref_f0_hz, hyp_lf0, "f0_rmse");
  require_frames(ref_f0_hz, ref_uv, "f0_rmse");
  require_frames(ref_f0_hz, hyp_uv, "f0_rmse");
  double sq = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < ref_f0_hz.rows(); ++t) {
    if (!voiced(ref_uv(t, 0)) || !voiced(hyp_uv(t, 0), threshold)) continue;
    const double e = std::exp(hyp_lf0(t, 0)) - ref_f0_hz(t, 0);
    sq += e * e;
    ++count;
  }
  if (count == 0) throw MetricError("f0_rmse: no frame is voiced in both");
  return std::sqrt(sq / static_cast<double>(count));
}

double uv_error(const Matrix<double>& ref_uv, const Matrix<double>& hyp_prob,
                double threshold) {
  require_frames(ref_uv, hyp_prob, "uv_error");
  if (ref_uv.rows() == 0) throw MetricError("uv_error: empty sequence");
  std::size_t wrong = 0;
  for (std::size_t t = 0; t < ref_uv.rows(); ++t) {
    wrong += voiced(ref_uv(t, 0)) != voiced(hyp_prob(t, 0), threshold);
  }
  return static_cast<double>(wrong) / static_cast<double>(ref_uv.rows());
}

double bapd(const Matrix<double>& ref_bap, const Matrix<double>& hyp_bap) {
  require_shape(ref_bap, hyp_bap, "bapd");
  if (ref_bap.rows() == 0 || ref_bap.cols() == 0)
    throw MetricError("bapd: empty sequence");
  double total = 0.0;
  for (std::size_t t = 0; t < ref_bap.rows(); ++t) {
    double sq = 0.0;
    for (std::size_t k = 0; k < ref_bap.cols(); ++k) {
      const double e = ref_bap(t, k) - hyp_bap(t, k);
      sq += e * e;
    }
    total += std::sqrt(sq / static_cast<double>(ref_bap.cols()));
  }
  return total / static_cast<double>(ref_bap.rows());
}

double total_mse(const std::map<std::string, Matrix<double>>& ref,
                 const std::map<std::string, Matrix<double>>& hyp) {
  if (ref.size() != hyp.size()) {
    throw MetricError("total_mse: stream sets differ");
  }
  double sq = 0.0;
  std::size_t count = 0;
  for (const auto& [name, r] : ref) {
    const auto it = hyp.find(name);
    if (it == hyp.end()) throw MetricError("total_mse: missing stream '" + name + "'");
    require_shape(r, it->second, "total_mse");
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double e = r[i] - it->second[i];
      sq += e * e;
    }
    count += r.size();
  }
  if (count == 0) throw MetricError("total_mse: no data");
  return sq / static_cast<double>(count);
}

}  // namespace dfsmn
