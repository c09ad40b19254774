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

// Central finite-difference verification of the analytic backward pass.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "dfsmn/network.h"

namespace dfsmn {

struct GradCheckOptions {
  std::size_t frames = 20;
  std::uint64_t seed = 0;
  double step = 1e-5;
  double tolerance = 1e-4;
  std::size_t samples_per_class = 20;
  // Test hook applied to the analytic gradients before comparison.
  std::function<void(NetworkParams<double>&)> corrupt_analytic;
};

struct ClassCheck {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  // Perturbations skipped because they moved a relu pre-activation across 0.
  std::size_t skipped_kinks = 0;
  std::string worst;  // scalar with the largest error, e.g. "layer1.a[3]"
};

struct GradCheckReport {
  // Parameter classes (see kParamClasses) plus "input" and "skip".
  std::map<std::string, ClassCheck> classes;
  bool pass = false;
  std::string worst_class;
  double worst_rel_err = 0.0;
};

// Builds a random fp64 network for `cfg` (memory coefficients and biases are
// randomized so every path is active), a random input of `frames` frames and
// random targets, then compares analytic and numeric gradients of the
// multi-task MSE with rel_err = |a - n| / max(|a|, |n|, 1e-12). The skip
// class is checked per skip-connected layer in isolation. Throws
// std::invalid_argument unless cfg.precision is fp64.
GradCheckReport grad_check(const NetworkConfig& cfg,
                           const GradCheckOptions& options = {});

}  // namespace dfsmn
