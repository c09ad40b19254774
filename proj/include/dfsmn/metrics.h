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

// Feature normalization, F0 preprocessing and objective distortion measures
// for acoustic feature streams.

#pragma once

#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfsmn/tensor.h"

namespace dfsmn {

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kStdFloor = 1e-8;

struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;
  // True where the dimension was (near) constant and std hit the floor.
  std::vector<bool> floored;
  std::vector<std::string> labels;
};

// Per-dimension mean and population standard deviation over all frames of
// all sequences. Needs at least two frames in total.
NormStats fit_norm(std::span<const Matrix<double>> sequences);
Matrix<double> apply_norm(const NormStats& stats, const Matrix<double>& x);
Matrix<double> invert_norm(const NormStats& stats, const Matrix<double>& x);

// Linear interpolation of F0 (Hz) across unvoiced frames (uv < 0.5); leading
// and trailing unvoiced runs take the nearest voiced value.
Matrix<double> interpolate_f0(const Matrix<double>& f0, const Matrix<double>& uv);

// Mel-cepstral distortion in dB, mean over frames of
// (10 / ln 10) * sqrt(2 * sum_{i>=1} (c_i - c'_i)^2). Column 0 is excluded.
double mcd(const Matrix<double>& ref_mcep, const Matrix<double>& hyp_mcep);

// RMSE in Hz between reference F0 and exp(hyp log-F0 static, column 0) over
// frames voiced in both reference and hypothesis. `hyp_uv` may hold
// probabilities; it is thresholded at `threshold`.
double f0_rmse(const Matrix<double>& ref_f0_hz, const Matrix<double>& hyp_lf0,
               const Matrix<double>& ref_uv, const Matrix<double>& hyp_uv,
               double threshold = 0.5);

// Fraction of frames where (hyp_prob >= threshold) disagrees with ref_uv.
double uv_error(const Matrix<double>& ref_uv, const Matrix<double>& hyp_prob,
                double threshold = 0.5);

// Mean over frames of the per-frame RMSE across BAP dimensions.
double bapd(const Matrix<double>& ref_bap, const Matrix<double>& hyp_bap);

// Squared error pooled over every frame and dimension of every stream,
// divided by the total number of scalars.
double total_mse(const std::map<std::string, Matrix<double>>& ref,
                 const std::map<std::string, Matrix<double>>& hyp);

}  // namespace dfsmn
