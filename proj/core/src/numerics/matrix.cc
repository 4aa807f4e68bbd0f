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


#include "magvlaq/numerics/matrix.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "magvlaq/errors.h"

namespace magvlaq {
inline namespace MAGVLAQ_ABI {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, Scalar fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols,
                         std::vector<Scalar> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    std::ostringstream msg;
    msg << "matrix data length " << data_.size() << " does not match shape "
        << rows << "x" << cols;
    throw DimensionError(msg.str());
  }
}

DenseMatrix DenseMatrix::FromRows(
    std::initializer_list<std::initializer_list<Scalar>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<Scalar> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged initializer rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return DenseMatrix(r, c, std::move(data));
}

DenseMatrix DenseMatrix::RowVector(std::span<const Scalar> values) {
  return DenseMatrix(1, values.size(),
                     std::vector<Scalar>(values.begin(), values.end()));
}

DenseMatrix DenseMatrix::Identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = Scalar{1};
  return m;
}

bool DenseMatrix::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](Scalar v) { return std::isfinite(v); });
}

void DenseMatrix::Fill(Scalar value) {
  std::fill(data_.begin(), data_.end(), value);
}

DenseMatrix DenseMatrix::Reshaped(std::size_t rows, std::size_t cols) const {
  if (rows * cols != data_.size()) {
    throw DimensionError("cannot reshape " + ShapeString() + " to " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  }
  return DenseMatrix(rows, cols, data_);
}

std::string DenseMatrix::ShapeString() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

namespace {

void CheckShape(const DenseMatrix& out, std::size_t rows, std::size_t cols,
                const char* what) {
  if (out.rows() != rows || out.cols() != cols) {
    throw DimensionError(std::string(what) + ": output is " +
                         out.ShapeString() + ", expected " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  }
}

}  // namespace

void MatmulAccumulate(const DenseMatrix& a, const DenseMatrix& b,
                      DenseMatrix& out) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: cannot multiply " + a.ShapeString() +
                         " by " + b.ShapeString());
  }
  CheckShape(out, a.rows(), b.cols(), "matmul");
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    Scalar* out_row = out.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const Scalar aik = a(i, k);
      if (aik == Scalar{0}) continue;
      const Scalar* b_row = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) out_row[j] += aik * b_row[j];
    }
  }
}

void MatmulTransposeAAccumulate(const DenseMatrix& a, const DenseMatrix& b,
                                DenseMatrix& out) {
  if (a.rows() != b.rows()) {
    throw DimensionError("matmul: cannot multiply transpose of " +
                         a.ShapeString() + " by " + b.ShapeString());
  }
  CheckShape(out, a.cols(), b.cols(), "matmul_tn");
  const std::size_t n = b.cols();
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const Scalar* b_row = b.row(k).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const Scalar aki = a(k, i);
      if (aki == Scalar{0}) continue;
      Scalar* out_row = out.row(i).data();
      for (std::size_t j = 0; j < n; ++j) out_row[j] += aki * b_row[j];
    }
  }
}

void MatmulTransposeBAccumulate(const DenseMatrix& a, const DenseMatrix& b,
                                DenseMatrix& out) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul: cannot multiply " + a.ShapeString() +
                         " by transpose of " + b.ShapeString());
  }
  CheckShape(out, a.rows(), b.rows(), "matmul_nt");
  const std::size_t inner = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const Scalar* a_row = a.row(i).data();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const Scalar* b_row = b.row(j).data();
      Scalar acc = 0;
      for (std::size_t k = 0; k < inner; ++k) acc += a_row[k] * b_row[k];
      out(i, j) += acc;
    }
  }
}

DenseMatrix Matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: cannot multiply " + a.ShapeString() +
                         " by " + b.ShapeString());
  }
  DenseMatrix out(a.rows(), b.cols());
  MatmulAccumulate(a, b, out);
  return out;
}

DenseMatrix Transpose(const DenseMatrix& a) {
  DenseMatrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  }
  return out;
}

void AddScaled(const DenseMatrix& in, Scalar scale, DenseMatrix& out) {
  if (!in.SameShape(out)) {
    throw DimensionError("add: shapes " + in.ShapeString() + " and " +
                         out.ShapeString() + " differ");
  }
  auto src = in.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += scale * src[i];
}

Accum SquaredNorm(std::span<const Scalar> v) {
  Accum acc = 0;
  for (Scalar x : v) acc += static_cast<Accum>(x) * static_cast<Accum>(x);
  return acc;
}

Accum FrobeniusNormSquared(const DenseMatrix& a) {
  return SquaredNorm(a.data());
}

Scalar MaxAbsDifference(const DenseMatrix& a, const DenseMatrix& b) {
  if (!a.SameShape(b)) {
    throw DimensionError("compare: shapes " + a.ShapeString() + " and " +
                         b.ShapeString() + " differ");
  }
  Scalar worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, static_cast<Scalar>(std::abs(a[i] - b[i])));
  }
  return worst;
}

}  // namespace MAGVLAQ_ABI
}  // namespace magvlaq
