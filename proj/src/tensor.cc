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

#include "dfsmn/tensor.h"

#include <cmath>
#include <numbers>

namespace dfsmn {

namespace {

template <typename T>
void require_same_shape(const Matrix<T>& a, const Matrix<T>& b,
                        const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape() +
                     " vs " + b.shape());
  }
}

}  // namespace

template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions disagree " + a.shape() + " x " +
                     b.shape());
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Matrix<T> c(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c.data() + i * n;
    const T* arow = a.data() + i * k;
    for (std::size_t r = 0; r < k; ++r) {
      const T av = arow[r];
      const T* brow = b.data() + r * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

template <typename T>
Matrix<T> matmul_tn(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: row counts disagree " + a.shape() + "^T x " +
                     b.shape());
  }
  const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
  Matrix<T> c(m, n);
  for (std::size_t r = 0; r < k; ++r) {
    const T* arow = a.data() + r * m;
    const T* brow = b.data() + r * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = arow[i];
      T* crow = c.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

template <typename T>
Matrix<T> matmul_nt(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: column counts disagree " + a.shape() + " x " +
                     b.shape() + "^T");
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  Matrix<T> c(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a.data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const T* brow = b.data() + j * k;
      T acc = T(0);
      for (std::size_t r = 0; r < k; ++r) acc += arow[r] * brow[r];
      c(i, j) = acc;
    }
  }
  return c;
}

template <typename T>
Matrix<T> zip_map(const Matrix<T>& a, const Matrix<T>& b, ZipOp op) {
  require_same_shape(a, b, "zip_map");
  Matrix<T> c(a.rows(), a.cols());
  if (op == ZipOp::kAdd) {
    for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] + b[i];
  } else {
    for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] * b[i];
  }
  return c;
}

template <typename T>
Matrix<T> transpose(const Matrix<T>& a) {
  Matrix<T> t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

template <typename T>
void add_row_vector(Matrix<T>& m, const Matrix<T>& bias) {
  if (bias.rows() != 1 || bias.cols() != m.cols()) {
    throw ShapeError("add_row_vector: bias " + bias.shape() +
                     " does not fit rows of " + m.shape());
  }
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias[j];
  }
}

template <typename T>
Matrix<T> column_sums(const Matrix<T>& m) {
  Matrix<T> s(1, m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) s[j] += r[j];
  }
  return s;
}

template <typename T>
void axpy(T scale, const Matrix<T>& in, Matrix<T>& out) {
  require_same_shape(in, out, "axpy");
  for (std::size_t i = 0; i < in.size(); ++i) out[i] += scale * in[i];
}

template <typename T>
bool all_finite(const Matrix<T>& m) {
  for (T v : m.values())
    if (!std::isfinite(v)) return false;
  return true;
}

std::uint64_t Rng::next_u64() {
  state_ += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform_open_low() {
  return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform_open_low();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
  // Rejection sampling keeps the result exactly uniform.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  Rng mixer(base ^ (stream * 0xD1B54A32D192ED03ULL));
  mixer.next_u64();
  return mixer.next_u64();
}

template <typename T>
Matrix<T> seeded_normal(std::uint64_t seed, std::size_t rows, std::size_t cols,
                        double mean, double stddev) {
  if (!(stddev >= 0.0) || !std::isfinite(stddev) || !std::isfinite(mean)) {
    throw std::invalid_argument("seeded_normal: stddev must be finite and >= 0");
  }
  Matrix<T> m(rows, cols);
  Rng rng(seed);
  for (std::size_t i = 0; i < m.size(); ++i) {
    m[i] = static_cast<T>(mean + stddev * rng.normal());
  }
  return m;
}

#define DFSMN_INSTANTIATE_TENSOR(T)                                          \
  template Matrix<T> matmul(const Matrix<T>&, const Matrix<T>&);             \
  template Matrix<T> matmul_tn(const Matrix<T>&, const Matrix<T>&);          \
  template Matrix<T> matmul_nt(const Matrix<T>&, const Matrix<T>&);          \
  template Matrix<T> zip_map(const Matrix<T>&, const Matrix<T>&, ZipOp);     \
  template Matrix<T> transpose(const Matrix<T>&);                            \
  template void add_row_vector(Matrix<T>&, const Matrix<T>&);                \
  template Matrix<T> column_sums(const Matrix<T>&);                          \
  template void axpy(T, const Matrix<T>&, Matrix<T>&);                       \
  template bool all_finite(const Matrix<T>&);                                \
  template Matrix<T> seeded_normal<T>(std::uint64_t, std::size_t,            \
                                      std::size_t, double, double);

DFSMN_INSTANTIATE_TENSOR(float)
DFSMN_INSTANTIATE_TENSOR(double)

#undef DFSMN_INSTANTIATE_TENSOR

}  // namespace dfsmn
