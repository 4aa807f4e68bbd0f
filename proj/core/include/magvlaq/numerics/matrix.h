// Copyright 2026 The MAG-VLAQ Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "magvlaq/config.h"

namespace magvlaq {
inline namespace MAGVLAQ_ABI {

/// Row-major dense matrix. Vectors are represented as 1×n rows.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, Scalar fill = Scalar{0});
  /// Takes ownership of `data`; throws DimensionError if its length is not
  /// rows×cols.
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<Scalar> data);

  /// Builds a matrix from nested rows, e.g. {{1, 2}, {3, 4}}.
  static DenseMatrix FromRows(
      std::initializer_list<std::initializer_list<Scalar>> rows);
  static DenseMatrix RowVector(std::span<const Scalar> values);
  static DenseMatrix Identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  Scalar& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  Scalar operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }
  Scalar& operator[](std::size_t i) { return data_[i]; }
  Scalar operator[](std::size_t i) const { return data_[i]; }

  std::span<Scalar> data() { return data_; }
  std::span<const Scalar> data() const { return data_; }
  std::span<Scalar> row(std::size_t r) {
    return std::span<Scalar>(data_).subspan(r * cols_, cols_);
  }
  std::span<const Scalar> row(std::size_t r) const {
    return std::span<const Scalar>(data_).subspan(r * cols_, cols_);
  }

  bool SameShape(const DenseMatrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool AllFinite() const;
  void Fill(Scalar value);
  /// Reinterprets the row-major buffer with a new shape of equal size.
  DenseMatrix Reshaped(std::size_t rows, std::size_t cols) const;

  /// "RxC", used in error messages.
  std::string ShapeString() const;

  friend bool operator==(const DenseMatrix& a, const DenseMatrix& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Scalar> data_;
};

// Plain (non-recording) kernels. The differentiable graph ops are built on
// these; they are also used directly in inference paths and tests.

DenseMatrix Matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix Transpose(const DenseMatrix& a);

// out += a·b, out += aᵀ·b and out += a·bᵀ. Shapes are checked.
void MatmulAccumulate(const DenseMatrix& a, const DenseMatrix& b,
                      DenseMatrix& out);
void MatmulTransposeAAccumulate(const DenseMatrix& a, const DenseMatrix& b,
                                DenseMatrix& out);
void MatmulTransposeBAccumulate(const DenseMatrix& a, const DenseMatrix& b,
                                DenseMatrix& out);

/// out += scale * in (same shape).
void AddScaled(const DenseMatrix& in, Scalar scale, DenseMatrix& out);

Accum SquaredNorm(std::span<const Scalar> v);
Accum FrobeniusNormSquared(const DenseMatrix& a);
Scalar MaxAbsDifference(const DenseMatrix& a, const DenseMatrix& b);

}  // namespace MAGVLAQ_ABI
}  // namespace magvlaq
