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
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "magvlaq/ode_fusion/ode_fusion.h"
#include "magvlaq/tokens/token_set.h"
#include "magvlaq/vlaq/vlaq.h"

namespace magvlaq {
inline namespace MAGVLAQ_ABI {

/// Global descriptor variant.
enum class Aggregator {
  kPooling,     // mean-pool + projection + L2
  kStaticVlaq,  // VLAQ with the shared prototypes on both branches
  kOdeVlaq,     // ground prototypes shifted by the fused RGB-LiDAR state
};

/// Ground modalities fed to the ground branch (sensor-failure evaluation).
enum class ModalityMask { kBoth, kImageOnly, kLidarOnly };

std::string_view ToString(Aggregator a);
std::string_view ToString(ModalityMask m);
/// Throw ConfigError on unknown names.
Aggregator ParseAggregator(std::string_view name);
ModalityMask ParseModalityMask(std::string_view name);

struct ModelConfig {
  std::size_t raw_dim = 96;  // D_raw of incoming tokens
  VlaqConfig vlaq;           // S, D, out_dim
  std::size_t fusion_dim = 64;
  double ode_horizon = 1.0;
  std::size_t ode_steps = 4;
  std::size_t scales = 4;
  double alpha = 0.1;  // query-shift scale
  Aggregator aggregator = Aggregator::kOdeVlaq;

  FusionConfig fusion() const {
    return {scales, vlaq.token_dim, fusion_dim, ode_horizon, ode_steps};
  }
  /// Throws ConfigError on non-positive dimensions or negative alpha.
  void Validate() const;
};

nlohmann::json ToJson(const ModelConfig& config);
ModelConfig ModelConfigFromJson(const nlohmann::json& j);

// Parameter names outside the vlaq / fusion modules.
inline constexpr const char* kImageProjector = "proj.ground_image";
inline constexpr const char* kLidarProjector = "proj.lidar";
inline constexpr const char* kAerialProjector = "proj.aerial";
inline constexpr const char* kImageNormGain = "ln.image.gain";
inline constexpr const char* kImageNormBias = "ln.image.bias";
inline constexpr const char* kLidarNormGain = "ln.lidar.gain";
inline constexpr const char* kLidarNormBias = "ln.lidar.bias";
inline constexpr const char* kShiftNet = "cond.shift";
inline constexpr const char* kPoolProjection = "pool.projection";

/// ΔC = Π_e(e_fuse) reshaped row-major into S×D.
Var PredictQueryShift(Graph& g, ParamStore& store, Var fused,
                      const VlaqConfig& config);
DenseMatrix PredictQueryShift(ParamStore& store, const FusedState& fused,
                              const VlaqConfig& config);

/// C̃ = C + alpha·shift.
Var AdaptPrototypes(Var prototypes, Var shift, Scalar alpha);
DenseMatrix AdaptPrototypes(const DenseMatrix& prototypes,
                            const DenseMatrix& shift, Scalar alpha);

/// Outputs of a batched ground forward pass.
struct GroundForward {
  Var descriptors;          // B × out_dim, unit rows
  std::vector<Var> shifts;  // ΔC_i per observation (ode-vlaq only)
};

/// Asymmetric ground/aerial descriptor model: projectors, ground layer
/// norms, ODE fusion, query-shift net and the VLAQ (or pooling) head.
class Model {
 public:
  /// Fresh parameters; only the parameters the aggregator uses are created.
  Model(ModelConfig config, std::uint64_t seed);
  /// Wraps loaded parameters. Throws ConfigError if a required parameter is
  /// missing or has the wrong shape.
  Model(ModelConfig config, ParamStore params);

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// Ground descriptors for a batch of observations. Throws
  /// DegenerateInputError when the mask leaves no usable tokens.
  GroundForward Ground(Graph& g,
                       std::span<const GroundObservation* const> batch,
                       ModalityMask mask = ModalityMask::kBoth);
  /// Aerial descriptors with the shared prototypes (B × out_dim).
  Var Aerial(Graph& g, std::span<const AerialReference* const> batch);
  /// Descriptors from a single ground modality aggregated with the shared
  /// prototypes (no conditioning); `mask` must not be kBoth.
  Var SingleModality(Graph& g,
                     std::span<const GroundObservation* const> batch,
                     ModalityMask mask);

  // Inference conveniences; safe to call concurrently.
  Descriptor GroundDescriptor(const GroundObservation& obs,
                              ModalityMask mask = ModalityMask::kBoth);
  Descriptor AerialDescriptor(const AerialReference& ref);
  /// ΔC for an observation (zero matrix for non-conditioned aggregators).
  DenseMatrix QueryShift(const GroundObservation& obs,
                         ModalityMask mask = ModalityMask::kBoth);
  /// α over the observation's aggregation tokens (N×S). ConfigError for the
  /// pooling aggregator.
  DenseMatrix GroundAssignment(const GroundObservation& obs,
                               ModalityMask mask = ModalityMask::kBoth);
  DenseMatrix AerialAssignment(const AerialReference& ref);

 private:
  struct GroundTokens {
    Var aggregation;         // concatenated, layer-normalized last-scale tokens
    Var prototypes;          // prototypes used for this observation
    Var shift;               // ΔC (ode-vlaq only)
  };

  void CheckParams() const;
  Var Project(Graph& g, const char* projector, const DenseMatrix& tokens);
  GroundTokens PrepareGround(Graph& g, const GroundObservation& obs,
                             ModalityMask mask);
  Var AerialTokens(Graph& g, const AerialReference& ref);
  Var Head(Graph& g, std::span<const Var> features);
  Var Features(Var tokens, Var prototypes);

  ModelConfig config_;
  ParamStore params_;
};

/// Checkpoint = MAGT container whose entries have kind "params"; the model
/// config and optimizer step live in the header's meta object.
std::uint64_t SaveCheckpoint(const Model& model,
                             const std::filesystem::path& path);
Model LoadCheckpoint(const std::filesystem::path& path);

}  // namespace MAGVLAQ_ABI
}  // namespace magvlaq
