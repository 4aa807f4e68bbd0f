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
#include <string>
#include <string_view>
#include <vector>

#include "magvlaq/numerics/matrix.h"

namespace magvlaq {
inline namespace MAGVLAQ_ABI {

enum class TokenKind { kGroundImage, kGroundLidar, kAerial };

std::string_view ToString(TokenKind kind);
/// Throws FormatError on an unknown name.
TokenKind ParseTokenKind(std::string_view name);

/// Local east-north coordinates in meters.
struct GeoPoint {
  double east = 0;
  double north = 0;
  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

double GeoDistance(GeoPoint a, GeoPoint b);

/// Multi-scale local tokens of one observation. Scale 0 is the shallowest,
/// the last scale feeds descriptor aggregation.
struct TokenSet {
  std::string id;
  TokenKind kind = TokenKind::kGroundImage;
  GeoPoint geo;
  std::vector<DenseMatrix> scales;

  std::size_t raw_dim() const { return scales.empty() ? 0 : scales[0].cols(); }
  const DenseMatrix& last_scale() const { return scales.back(); }
};

enum class Split { kTrain, kTest };
std::string_view ToString(Split split);

struct GroundObservation {
  TokenSet image;
  TokenSet lidar;
  Split split = Split::kTrain;

  const std::string& id() const { return image.id; }
  GeoPoint geo() const { return image.geo; }
};

struct AerialReference {
  TokenSet tokens;
  std::string modality_tag;

  const std::string& id() const { return tokens.id; }
  GeoPoint geo() const { return tokens.geo; }
};

struct TokenDataset {
  std::vector<GroundObservation> ground;
  std::vector<AerialReference> aerial;
};

struct Violation {
  std::string id;
  std::string rule;
  std::string detail;
};

/// Checks every TokenSet / GroundObservation / TokenDataset invariant and
/// returns one violation per breach (empty when valid). Rule names:
/// duplicate-id, empty-scales, empty-scale, dim-mismatch, non-finite-geo,
/// non-finite-token, wrong-kind, geo-mismatch, scale-count-mismatch,
/// mixed-modality, orphan-query.
std::vector<Violation> ValidateDataset(const TokenDataset& dataset,
                                       double tau_p = 10.0);

/// Writes the dataset as a MAGT file. Throws ValidationError if the dataset
/// is invalid and IoError on write failure.
std::uint64_t SaveTokenFile(const TokenDataset& dataset,
                            const std::filesystem::path& path,
                            double tau_p = 10.0);

/// Reads and re-validates a MAGT token file.
TokenDataset LoadTokenFile(const std::filesystem::path& path,
                           double tau_p = 10.0);

}  // namespace MAGVLAQ_ABI
}  // namespace magvlaq
