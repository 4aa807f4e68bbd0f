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


#include "magvlaq/numerics/grad_check.h"

#include <algorithm>
#include <cmath>

#include "magvlaq/errors.h"

namespace magvlaq {
inline namespace MAGVLAQ_ABI {

namespace {

void CheckStep(double h) {
  if (!(h >= 1e-5 && h <= 1e-2)) {
    throw ContractError("finite-difference step " + std::to_string(h) +
                        " outside [1e-5, 1e-2]");
  }
}

}  // namespace

DenseMatrix FiniteDifferenceGrad(
    const std::function<Accum(const DenseMatrix&)>& f, const DenseMatrix& at,
    double h) {
  CheckStep(h);
  DenseMatrix probe = at;
  DenseMatrix out(at.rows(), at.cols());
  for (std::size_t k = 0; k < at.size(); ++k) {
    const Scalar original = probe[k];
    probe[k] = static_cast<Scalar>(original + h);
    const double up_step = static_cast<double>(probe[k]) - original;
    const Accum plus = f(probe);
    probe[k] = static_cast<Scalar>(original - h);
    const double down_step = original - static_cast<double>(probe[k]);
    const Accum minus = f(probe);
    probe[k] = original;
    out[k] = static_cast<Scalar>((plus - minus) / (up_step + down_step));
  }
  return out;
}

DenseMatrix FiniteDifferenceGrad(ParamStore& store, const std::string& name,
                                 const std::function<Accum()>& loss,
                                 double h) {
  CheckStep(h);
  DenseMatrix& value = store.at(name).value;
  DenseMatrix out(value.rows(), value.cols());
  for (std::size_t k = 0; k < value.size(); ++k) {
    const Scalar original = value[k];
    value[k] = static_cast<Scalar>(original + h);
    const double up_step = static_cast<double>(value[k]) - original;
    const Accum plus = loss();
    value[k] = static_cast<Scalar>(original - h);
    const double down_step = original - static_cast<double>(value[k]);
    const Accum minus = loss();
    value[k] = original;
    out[k] = static_cast<Scalar>((plus - minus) / (up_step + down_step));
  }
  return out;
}

GradCheckResult CompareGradients(const DenseMatrix& analytic,
                                 const DenseMatrix& numeric, double rel_tol,
                                 double abs_tol) {
  if (!analytic.SameShape(numeric)) {
    throw DimensionError("gradient shapes " + analytic.ShapeString() + " and " +
                         numeric.ShapeString() + " differ");
  }
  GradCheckResult result;
  double worst = -1;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    const double a = analytic[k];
    const double n = numeric[k];
    const double abs_err = std::abs(a - n);
    result.max_abs_error = std::max(result.max_abs_error, abs_err);
    if (abs_err < abs_tol) continue;
    const double rel = abs_err / std::max(std::abs(a), std::abs(n));
    result.max_rel_error = std::max(result.max_rel_error, rel);
    if (rel >= rel_tol) ++result.failures;
    if (rel > worst) {
      worst = rel;
      result.worst_index = k;
    }
  }
  return result;
}

}  // namespace MAGVLAQ_ABI
}  // namespace magvlaq
