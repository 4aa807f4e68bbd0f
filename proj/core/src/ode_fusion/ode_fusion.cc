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


#include "magvlaq/ode_fusion/ode_fusion.h"

#include <array>

#include "magvlaq/errors.h"
#include "magvlaq/numerics/mlp.h"

namespace magvlaq {
inline namespace MAGVLAQ_ABI {

std::string FusionParamPrefix(const char* prefix, std::size_t scale) {
  return std::string(prefix) + "." + std::to_string(scale);
}

void InitFusion(ParamStore& store, const FusionConfig& config,
                std::uint64_t seed) {
  if (config.scales == 0 || config.fusion_dim == 0 || config.token_dim == 0) {
    throw ConfigError("fusion dimensions must be positive");
  }
  if (config.steps == 0 || !(config.horizon > 0)) {
    throw ConfigError("fusion needs steps >= 1 and horizon > 0");
  }
  const std::array<std::size_t, 3> pool_dims{config.token_dim, config.fusion_dim,
                                             config.fusion_dim};
  const std::array<std::size_t, 3> dyn_dims{config.fusion_dim, config.fusion_dim,
                                            config.fusion_dim};
  for (std::size_t l = 0; l < config.scales; ++l) {
    InitMlp(store, FusionParamPrefix(kFusionImagePrefix, l), pool_dims, seed);
    InitMlp(store, FusionParamPrefix(kFusionLidarPrefix, l), pool_dims, seed);
    InitMlp(store, FusionParamPrefix(kFusionDynamicsPrefix, l), dyn_dims, seed,
            /*zero_last_layer=*/true);
  }
}

Var Rk4Integrate(Var state0, const Dynamics& dynamics, double horizon,
                 std::size_t steps) {
  if (steps == 0) throw ContractError("rk4 needs at least one step");
  if (!(horizon > 0)) throw ContractError("rk4 horizon must be positive");
  const Scalar h = static_cast<Scalar>(horizon / static_cast<double>(steps));
  Var y = state0;
  for (std::size_t step = 0; step < steps; ++step) {
    Var k1 = dynamics(y);
    Var k2 = dynamics(Add(y, Scale(k1, h / 2)));
    Var k3 = dynamics(Add(y, Scale(k2, h / 2)));
    Var k4 = dynamics(Add(y, Scale(k3, h)));
    Var slope = Add(Add(k1, Scale(k2, 2)), Add(Scale(k3, 2), k4));
    y = Add(y, Scale(slope, h / 6));
    if (!y.value().AllFinite()) {
      throw DivergenceError("rk4 state became non-finite at step " +
                            std::to_string(step + 1) + " of " +
                            std::to_string(steps));
    }
  }
  return y;
}

Var PoolAndProject(Graph& g, ParamStore& store, Var image_tokens,
                   Var lidar_tokens, std::size_t scale,
                   const FusionConfig& config) {
  if (scale >= config.scales) {
    throw ContractError("scale index " + std::to_string(scale) +
                        " outside 0.." + std::to_string(config.scales - 1));
  }
  if (!image_tokens.valid() && !lidar_tokens.valid()) {
    throw DegenerateInputError("pool_and_project: both modalities missing");
  }
  auto branch = [&](Var tokens, const char* prefix) {
    if (tokens.rows() == 0) {
      throw DegenerateInputError("pool_and_project: empty token matrix at scale " +
                                 std::to_string(scale));
    }
    const auto layers = BindMlp(g, store, FusionParamPrefix(prefix, scale));
    return MlpForward(MeanRows(tokens), layers);
  };
  if (!lidar_tokens.valid()) return branch(image_tokens, kFusionImagePrefix);
  if (!image_tokens.valid()) return branch(lidar_tokens, kFusionLidarPrefix);
  return Add(branch(image_tokens, kFusionImagePrefix),
             branch(lidar_tokens, kFusionLidarPrefix));
}

Var Fuse(Graph& g, ParamStore& store, std::span<const Var> image_scales,
         std::span<const Var> lidar_scales, const FusionConfig& config) {
  if (image_scales.empty() && lidar_scales.empty()) {
    throw DegenerateInputError("fuse: both modalities missing");
  }
  if (!image_scales.empty() && !lidar_scales.empty() &&
      image_scales.size() != lidar_scales.size()) {
    throw ConfigError("fuse: " + std::to_string(image_scales.size()) +
                      " image scales vs " + std::to_string(lidar_scales.size()) +
                      " lidar scales");
  }
  const std::size_t levels =
      image_scales.empty() ? lidar_scales.size() : image_scales.size();
  if (levels != config.scales) {
    throw ConfigError("fuse: observation has " + std::to_string(levels) +
                      " scales, model expects " + std::to_string(config.scales));
  }
  Var state;
  for (std::size_t l = levels; l-- > 0;) {
    Var image = image_scales.empty() ? Var() : image_scales[l];
    Var lidar = lidar_scales.empty() ? Var() : lidar_scales[l];
    Var m = PoolAndProject(g, store, image, lidar, l, config);
    Var start = state.valid() ? Add(m, state) : m;
    const auto layers =
        BindMlp(g, store, FusionParamPrefix(kFusionDynamicsPrefix, l));
    state = Rk4Integrate(
        start, [&layers](Var y) { return MlpForward(y, layers); },
        config.horizon, config.steps);
  }
  return state;
}

FusedState Fuse(ParamStore& store, std::span<const DenseMatrix> image_scales,
                std::span<const DenseMatrix> lidar_scales,
                const FusionConfig& config) {
  Graph g(Graph::Mode::kInference);
  std::vector<Var> image, lidar;
  for (const DenseMatrix& m : image_scales) image.push_back(g.ConstantRef(m));
  for (const DenseMatrix& m : lidar_scales) lidar.push_back(g.ConstantRef(m));
  Var e = Fuse(g, store, image, lidar, config);
  auto values = e.value().data();
  return {std::vector<Scalar>(values.begin(), values.end())};
}

}  // namespace MAGVLAQ_ABI
}  // namespace magvlaq
