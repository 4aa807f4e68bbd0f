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

#include <cstdint>
#include <vector>

#include "magvlaq/numerics/autodiff.h"

namespace magvlaq {
inline namespace MAGVLAQ_ABI {

struct VlaqConfig {
  std::size_t num_queries = 64;  // S
  std::size_t token_dim = 128;   // D
  std::size_t out_dim = 512;
};

/// Learnable query prototypes C (S×D).
struct QueryPrototypes {
  DenseMatrix matrix;
  std::size_t count() const { return matrix.rows(); }
  std::size_t dim() const { return matrix.cols(); }
};

/// Bias-free projection (S·D)×out_dim applied after intra-normalization.
struct VlaqHead {
  DenseMatrix projection;
};

enum class Branch { kGround, kAerial };

struct Descriptor {
  std::vector<Scalar> values;
  Branch branch = Branch::kAerial;
  std::size_t dim() const { return values.size(); }
};

inline constexpr const char* kPrototypesParam = "vlaq.prototypes";
inline constexpr const char* kProjectionParam = "vlaq.projection";

/// Registers prototypes ~ N(0, 1/√D) per entry (std 1/√D) and the projection
/// ~ N(0, 1/(S·D)).
void InitVlaq(ParamStore& store, const VlaqConfig& config, std::uint64_t seed);

// -- differentiable ---------------------------------------------------------

/// α (N×S): softmax over tokens of x_n·c_s / √D.
Var AssignmentWeights(Var tokens, Var prototypes);
/// v (S×D): v_s = Σ_n α_{n,s} (x_n − c_s).
Var ResidualAggregate(Var tokens, Var prototypes, Var alpha);
/// Intra-normalized residuals of one token set, flattened to 1×(S·D).
/// Residuals with norm <= 1e-12 pass through as zeros.
Var VlaqFeatures(Var tokens, Var prototypes);
/// Projects stacked feature rows (B×S·D) and L2-normalizes each output row.
Var ProjectAndNormalize(Var features, Var projection);

// -- value level --------------------------------------------------------------

DenseMatrix AssignmentWeights(const DenseMatrix& tokens,
                              const DenseMatrix& prototypes);
DenseMatrix ResidualAggregate(const DenseMatrix& tokens,
                              const DenseMatrix& prototypes,
                              const DenseMatrix& alpha);

/// Full aggregation of one token matrix. Throws DimensionError on width
/// mismatch and DegenerateInputError if the projected descriptor is zero.
Descriptor VlaqDescriptor(const DenseMatrix& tokens,
                          const QueryPrototypes& prototypes,
                          const VlaqHead& head,
                          Branch branch = Branch::kAerial);

/// Scalar-loop reference of VlaqDescriptor sharing no code with it: naive
/// exp-normalization and explicit sums in double precision.
Descriptor BruteForceVlaq(const DenseMatrix& tokens,
                          const QueryPrototypes& prototypes,
                          const VlaqHead& head,
                          Branch branch = Branch::kAerial);

}  // namespace MAGVLAQ_ABI
}  // namespace magvlaq
