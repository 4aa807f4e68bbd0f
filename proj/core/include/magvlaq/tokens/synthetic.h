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
#include <string>
#include <vector>

#include "magvlaq/tokens/token_set.h"

namespace magvlaq {
inline namespace MAGVLAQ_ABI {

/// Parameters of the synthetic token generator that stands in for the
/// image and point-cloud encoders.
struct SynthConfig {
  std::size_t num_places = 16;
  std::size_t observations_per_place = 4;
  std::size_t test_per_place = 1;
  std::size_t scales = 4;
  std::size_t tokens_per_scale = 64;
  std::size_t aerial_tokens = 64;
  std::size_t raw_dim = 96;
  std::size_t latent_dim = 16;
  double noise = 0.1;
  double place_spacing_m = 50.0;
  double tau_p = 10.0;
  double tau_n = 25.0;
  std::string modality_tag = "satellite";
};

/// Ground truth behind a generated dataset, exposed for oracle checks.
struct SynthTruth {
  DenseMatrix latents;                  // num_places × latent_dim
  std::vector<DenseMatrix> image_maps;  // per scale, (N·raw_dim) × latent_dim
  std::vector<DenseMatrix> lidar_maps;  // per scale
  DenseMatrix aerial_map;               // (N_aerial·raw_dim) × latent_dim
  std::vector<std::size_t> ground_place;
  std::vector<std::size_t> aerial_place;
};

/// Builds a dataset where place k has a latent u_k ~ N(0, I). Token row n of
/// a scale is (rows n·raw_dim .. (n+1)·raw_dim of the modality/scale map)·u_k
/// plus N(0, noise²) noise. Ground observations are jittered strictly inside
/// tau_p / 2 of the place center; the aerial reference sits at the center.
///
/// Pure function of (config, seed). Throws ConfigError when num_places < 2,
/// spacing <= tau_n, tau_n <= tau_p, or the split leaves no train query.
TokenDataset GenerateSyntheticDataset(const SynthConfig& config,
                                      std::uint64_t seed,
                                      SynthTruth* truth = nullptr);

}  // namespace MAGVLAQ_ABI
}  // namespace magvlaq
