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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "magvlaq/numerics/autodiff.h"

namespace magvlaq {
inline namespace MAGVLAQ_ABI {

struct FusionConfig {
  std::size_t scales = 4;        // L
  std::size_t token_dim = 128;   // width of the pooled (projected) tokens
  std::size_t fusion_dim = 64;   // D_f
  double horizon = 1.0;          // T
  std::size_t steps = 4;         // RK4 steps per block
};

struct FusedState {
  std::vector<Scalar> e_fuse;
};

// Parameter prefixes; `<prefix>.<scale>` names one per-scale MLP.
inline constexpr const char* kFusionImagePrefix = "fusion.h_image";
inline constexpr const char* kFusionLidarPrefix = "fusion.h_lidar";
inline constexpr const char* kFusionDynamicsPrefix = "fusion.dynamics";

std::string FusionParamPrefix(const char* prefix, std::size_t scale);

/// Registers per-scale pooling projections (D → D_f → D_f, tanh) and
/// dynamics nets (D_f → D_f → D_f, tanh, zero final layer so every block
/// starts as the identity flow).
void InitFusion(ParamStore& store, const FusionConfig& config,
                std::uint64_t seed);

using Dynamics = std::function<Var(Var)>;

/// Classical fixed-step RK4 over [0, horizon], differentiable through the
/// unrolled steps. Throws ContractError when steps == 0 or horizon <= 0 and
/// DivergenceError naming the step at which the state became non-finite.
Var Rk4Integrate(Var state0, const Dynamics& dynamics, double horizon,
                 std::size_t steps);

/// m_ℓ = h_ℓ^I(mean rows of image) + h_ℓ^P(mean rows of lidar). A modality
/// passed as an invalid Var is absent and contributes zero. An empty token
/// matrix throws DegenerateInputError.
Var PoolAndProject(Graph& g, ParamStore& store, Var image_tokens,
                   Var lidar_tokens, std::size_t scale,
                   const FusionConfig& config);

/// Deep-to-shallow cascade: γ^{L}(0) = m_L, γ^{ℓ}(0) = m_ℓ + γ^{ℓ+1}(T),
/// returns γ^{1}(T) as 1×D_f. Scales are ordered shallow (index 0) to deep.
/// An empty span marks a missing modality. Throws ConfigError on scale-count
/// mismatch and DegenerateInputError when both modalities are missing.
Var Fuse(Graph& g, ParamStore& store, std::span<const Var> image_scales,
         std::span<const Var> lidar_scales, const FusionConfig& config);

/// Inference-mode fusion of raw per-scale matrices (already projected).
FusedState Fuse(ParamStore& store, std::span<const DenseMatrix> image_scales,
                std::span<const DenseMatrix> lidar_scales,
                const FusionConfig& config);

}  // namespace MAGVLAQ_ABI
}  // namespace magvlaq
