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

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dfsmn {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Dense row-major matrix. A feature sequence is a Matrix with one row per
// frame (T x D); parameter vectors are stored as 1 x n matrices.
template <typename T>
class Matrix {
 public:
  using value_type = T;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_string(rows, cols));
    }
  }
  // Nested-list construction, mainly for tests: {{1, 2}, {3, 4}}.
  Matrix(std::initializer_list<std::initializer_list<T>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw ShapeError("ragged matrix initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  bool same_shape(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }
  std::string shape() const { return shape_string(rows_, cols_); }

  void set_zero() { std::fill(data_.begin(), data_.end(), T(0)); }

  template <typename U>
  Matrix<U> cast() const {
    Matrix<U> out(rows_, cols_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

  static std::string shape_string(std::size_t r, std::size_t c) {
    return "[" + std::to_string(r) + "x" + std::to_string(c) + "]";
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

// A T x D feature sequence, one row per frame.
template <typename T>
using SequenceTensor = Matrix<T>;

enum class ZipOp { kAdd, kMul };

// C = A * B.
template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b);

// C = A^T * B, without materializing the transpose.
template <typename T>
Matrix<T> matmul_tn(const Matrix<T>& a, const Matrix<T>& b);

// C = A * B^T, without materializing the transpose.
template <typename T>
Matrix<T> matmul_nt(const Matrix<T>& a, const Matrix<T>& b);

template <typename T>
Matrix<T> zip_map(const Matrix<T>& a, const Matrix<T>& b, ZipOp op);

template <typename T>
Matrix<T> transpose(const Matrix<T>& a);

// Adds the 1 x n row vector `bias` to every row of `m` in place.
template <typename T>
void add_row_vector(Matrix<T>& m, const Matrix<T>& bias);

// Column sums as a 1 x cols row vector.
template <typename T>
Matrix<T> column_sums(const Matrix<T>& m);

// out += scale * in, shapes must agree.
template <typename T>
void axpy(T scale, const Matrix<T>& in, Matrix<T>& out);

template <typename T>
bool all_finite(const Matrix<T>& m);

// SplitMix64 stream: state advances by the golden-ratio increment and each
// output is the standard SplitMix64 finalizer of the new state. Uniform
// doubles take the top 53 bits; normals use the Box-Muller transform on a
// pair of uniforms, returning both variates in sequence. The algorithm is
// fixed so that identical seeds reproduce identical streams on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  // Uniform in [0, 1).
  double uniform();
  // Uniform in (0, 1]; safe as a log argument.
  double uniform_open_low();
  double normal();
  // Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = below(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Derives an independent stream seed from a base seed and a stream index.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// rows x cols matrix of N(mean, stddev^2) samples drawn from Rng(seed).
template <typename T>
Matrix<T> seeded_normal(std::uint64_t seed, std::size_t rows, std::size_t cols,
                        double mean, double stddev);

}  // namespace dfsmn
