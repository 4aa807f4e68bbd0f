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

#include <functional>
#include <string>

#include "magvlaq/numerics/param_store.h"

namespace magvlaq {
inline namespace MAGVLAQ_ABI {

/// Central differences (f(θ + h·e_k) − f(θ − h·e_k)) / 2h for every entry of
/// `at`. `h` must lie in [1e-5, 1e-2].
DenseMatrix FiniteDifferenceGrad(
    const std::function<Accum(const DenseMatrix&)>& f, const DenseMatrix& at,
    double h);

/// Same, perturbing a stored parameter in place; the value is restored
/// bit-exactly afterwards.
DenseMatrix FiniteDifferenceGrad(ParamStore& store, const std::string& name,
                                 const std::function<Accum()>& loss, double h);

struct GradCheckResult {
  double max_rel_error = 0;  // over entries outside the absolute floor
  double max_abs_error = 0;
  std::size_t failures = 0;
  std::size_t worst_index = 0;
  bool ok() const { return failures == 0; }
};

/// An entry passes when |a − n| < abs_tol or |a − n| / max(|a|, |n|) <
/// rel_tol.
GradCheckResult CompareGradients(const DenseMatrix& analytic,
                                 const DenseMatrix& numeric,
                                 double rel_tol = 1e-3, double abs_tol = 1e-6);

}  // namespace MAGVLAQ_ABI
}  // namespace magvlaq
