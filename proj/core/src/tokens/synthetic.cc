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


#include "magvlaq/tokens/synthetic.h"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "magvlaq/errors.h"
#include "magvlaq/numerics/random.h"

namespace magvlaq {
inline namespace MAGVLAQ_ABI {

namespace {

void CheckConfig(const SynthConfig& c) {
  if (c.num_places < 2) {
    throw ConfigError("synthetic dataset needs at least 2 places");
  }
  if (!(c.tau_n > c.tau_p) || !(c.tau_p > 0)) {
    throw ConfigError("mining thresholds need 0 < tau_p < tau_n");
  }
  if (!(c.place_spacing_m > c.tau_n)) {
    throw ConfigError("place spacing " + std::to_string(c.place_spacing_m) +
                      " m must exceed tau_n " + std::to_string(c.tau_n) + " m");
  }
  if (c.observations_per_place == 0 ||
      c.test_per_place >= c.observations_per_place) {
    throw ConfigError("each place needs at least one training observation");
  }
  if (c.scales == 0 || c.tokens_per_scale == 0 || c.aerial_tokens == 0 ||
      c.raw_dim == 0 || c.latent_dim == 0) {
    throw ConfigError("synthetic dimensions must be positive");
  }
  if (!(c.noise >= 0) || !std::isfinite(c.noise)) {
    throw ConfigError("noise must be a finite non-negative value");
  }
}

// Token matrix N×raw_dim whose row n is map[n·raw_dim : (n+1)·raw_dim]·u
// plus noise.
DenseMatrix Render(const DenseMatrix& map, std::span<const Scalar> latent,
                   std::size_t tokens, std::size_t raw_dim, double noise,
                   Rng& rng) {
  std::normal_distribution<double> eps(0.0, 1.0);
  DenseMatrix out(tokens, raw_dim);
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto row = map.row(i);
    double acc = 0;
    for (std::size_t k = 0; k < row.size(); ++k) acc += double(row[k]) * latent[k];
    out[i] = static_cast<Scalar>(acc + (noise > 0 ? noise * eps(rng) : 0.0));
  }
  return out;
}

std::string PlaceId(char prefix, std::size_t place) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%c%03zu", prefix, place);
  return buf;
}

}  // namespace

TokenDataset GenerateSyntheticDataset(const SynthConfig& config,
                                      std::uint64_t seed, SynthTruth* truth) {
  CheckConfig(config);
  const std::size_t d_lat = config.latent_dim;
  const double map_std = 1.0 / std::sqrt(static_cast<double>(d_lat));

  SynthTruth local;
  SynthTruth& t = truth != nullptr ? *truth : local;
  t = SynthTruth{};
  {
    Rng rng = NamedRng(seed, "synth/latents");
    t.latents = RandomNormal(config.num_places, d_lat, 1.0, rng);
  }
  for (std::size_t l = 0; l < config.scales; ++l) {
    Rng img = NamedRng(seed, "synth/map/image/" + std::to_string(l));
    t.image_maps.push_back(RandomNormal(config.tokens_per_scale * config.raw_dim,
                                        d_lat, map_std, img));
    Rng pc = NamedRng(seed, "synth/map/lidar/" + std::to_string(l));
    t.lidar_maps.push_back(RandomNormal(config.tokens_per_scale * config.raw_dim,
                                        d_lat, map_std, pc));
  }
  {
    Rng rng = NamedRng(seed, "synth/map/aerial");
    t.aerial_map =
        RandomNormal(config.aerial_tokens * config.raw_dim, d_lat, map_std, rng);
  }

  const std::size_t grid = static_cast<std::size_t>(
      std::ceil(std::sqrt(static_cast<double>(config.num_places))));
  TokenDataset dataset;
  for (std::size_t k = 0; k < config.num_places; ++k) {
    const GeoPoint center{static_cast<double>(k % grid) * config.place_spacing_m,
                          static_cast<double>(k / grid) * config.place_spacing_m};
    const auto latent = t.latents.row(k);

    AerialReference ref;
    ref.modality_tag = config.modality_tag;
    ref.tokens.id = PlaceId('a', k);
    ref.tokens.kind = TokenKind::kAerial;
    ref.tokens.geo = center;
    {
      Rng rng = NamedRng(seed, "synth/noise/" + ref.tokens.id);
      ref.tokens.scales.push_back(Render(t.aerial_map, latent,
                                         config.aerial_tokens, config.raw_dim,
                                         config.noise, rng));
    }
    dataset.aerial.push_back(std::move(ref));
    t.aerial_place.push_back(k);

    for (std::size_t o = 0; o < config.observations_per_place; ++o) {
      char buf[48];
      std::snprintf(buf, sizeof(buf), "g%03zu_%02zu", k, o);
      const std::string id = buf;
      Rng rng = NamedRng(seed, "synth/noise/" + id);
      // jitter radius stays strictly below tau_p / 2
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const double radius = 0.999 * (config.tau_p / 2) * std::sqrt(unit(rng));
      const double angle = 2 * std::numbers::pi * unit(rng);
      const GeoPoint geo{center.east + radius * std::cos(angle),
                         center.north + radius * std::sin(angle)};

      GroundObservation g;
      g.split = o + config.test_per_place >= config.observations_per_place
                    ? Split::kTest
                    : Split::kTrain;
      g.image = {id, TokenKind::kGroundImage, geo, {}};
      g.lidar = {id, TokenKind::kGroundLidar, geo, {}};
      for (std::size_t l = 0; l < config.scales; ++l) {
        g.image.scales.push_back(Render(t.image_maps[l], latent,
                                        config.tokens_per_scale, config.raw_dim,
                                        config.noise, rng));
        g.lidar.scales.push_back(Render(t.lidar_maps[l], latent,
                                        config.tokens_per_scale, config.raw_dim,
                                        config.noise, rng));
      }
      dataset.ground.push_back(std::move(g));
      t.ground_place.push_back(k);
    }
  }
  return dataset;
}

}  // namespace MAGVLAQ_ABI
}  // namespace magvlaq
