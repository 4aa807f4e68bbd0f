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


#include "magvlaq/tokens/token_set.h"

#include <cmath>
#include <map>
#include <set>

#include "magvlaq/errors.h"
#include "magvlaq/tokens/magt.h"

namespace magvlaq {
inline namespace MAGVLAQ_ABI {

std::string_view ToString(TokenKind kind) {
  switch (kind) {
    case TokenKind::kGroundImage:
      return "ground-image";
    case TokenKind::kGroundLidar:
      return "ground-lidar";
    case TokenKind::kAerial:
      return "aerial";
  }
  return "unknown";
}

TokenKind ParseTokenKind(std::string_view name) {
  if (name == "ground-image") return TokenKind::kGroundImage;
  if (name == "ground-lidar") return TokenKind::kGroundLidar;
  if (name == "aerial") return TokenKind::kAerial;
  throw FormatError("unknown token kind '" + std::string(name) + "'");
}

std::string_view ToString(Split split) {
  return split == Split::kTrain ? "train" : "test";
}

double GeoDistance(GeoPoint a, GeoPoint b) {
  return std::hypot(a.east - b.east, a.north - b.north);
}

namespace {

void CheckTokenSet(const TokenSet& ts, TokenKind expected,
                   std::vector<Violation>& out) {
  if (ts.kind != expected) {
    out.push_back({ts.id, "wrong-kind",
                   "expected " + std::string(ToString(expected)) + ", got " +
                       std::string(ToString(ts.kind))});
  }
  if (!std::isfinite(ts.geo.east) || !std::isfinite(ts.geo.north)) {
    out.push_back({ts.id, "non-finite-geo", ""});
  }
  if (ts.scales.empty()) {
    out.push_back({ts.id, "empty-scales", "no token scales"});
    return;
  }
  const std::size_t dim = ts.scales[0].cols();
  for (std::size_t l = 0; l < ts.scales.size(); ++l) {
    const DenseMatrix& s = ts.scales[l];
    if (s.rows() == 0 || s.cols() == 0) {
      out.push_back({ts.id, "empty-scale", "scale " + std::to_string(l)});
    }
    if (s.cols() != dim) {
      out.push_back({ts.id, "dim-mismatch",
                     "scale " + std::to_string(l) + " has " +
                         std::to_string(s.cols()) + " columns, scale 0 has " +
                         std::to_string(dim)});
    }
    if (!s.AllFinite()) {
      out.push_back({ts.id, "non-finite-token", "scale " + std::to_string(l)});
    }
  }
}

}  // namespace

std::vector<Violation> ValidateDataset(const TokenDataset& dataset,
                                       double tau_p) {
  std::vector<Violation> out;
  std::set<std::string> seen;
  for (const GroundObservation& g : dataset.ground) {
    if (!seen.insert(g.id()).second) {
      out.push_back({g.id(), "duplicate-id", "ground"});
    }
    CheckTokenSet(g.image, TokenKind::kGroundImage, out);
    CheckTokenSet(g.lidar, TokenKind::kGroundLidar, out);
    if (g.image.id != g.lidar.id) {
      out.push_back({g.id(), "id-mismatch", "lidar id '" + g.lidar.id + "'"});
    }
    if (!(g.image.geo == g.lidar.geo)) {
      out.push_back({g.id(), "geo-mismatch", "image and lidar geo differ"});
    }
    if (g.image.scales.size() != g.lidar.scales.size()) {
      out.push_back({g.id(), "scale-count-mismatch",
                     std::to_string(g.image.scales.size()) + " image vs " +
                         std::to_string(g.lidar.scales.size()) + " lidar"});
    }
  }
  seen.clear();
  std::set<std::string> tags;
  for (const AerialReference& a : dataset.aerial) {
    if (!seen.insert(a.id()).second) {
      out.push_back({a.id(), "duplicate-id", "aerial"});
    }
    CheckTokenSet(a.tokens, TokenKind::kAerial, out);
    tags.insert(a.modality_tag);
  }
  if (tags.size() > 1) {
    out.push_back({"", "mixed-modality",
                   std::to_string(tags.size()) + " aerial modality tags"});
  }
  for (const GroundObservation& g : dataset.ground) {
    if (g.split != Split::kTrain) continue;
    bool has_positive = false;
    for (const AerialReference& a : dataset.aerial) {
      if (GeoDistance(g.geo(), a.geo()) < tau_p) {
        has_positive = true;
        break;
      }
    }
    if (!has_positive) {
      out.push_back({g.id(), "orphan-query",
                     "no aerial reference within " + std::to_string(tau_p) +
                         " m"});
    }
  }
  return out;
}

namespace {

void ThrowIfInvalid(const TokenDataset& dataset, double tau_p) {
  const auto violations = ValidateDataset(dataset, tau_p);
  if (!violations.empty()) {
    const Violation& v = violations.front();
    throw ValidationError("dataset violates '" + v.rule + "' at id '" + v.id +
                          "'" + (v.detail.empty() ? "" : ": " + v.detail));
  }
}

MagtEntry ToEntry(const TokenSet& ts) {
  MagtEntry e;
  e.id = ts.id;
  e.kind = std::string(ToString(ts.kind));
  e.east = ts.geo.east;
  e.north = ts.geo.north;
  for (std::size_t l = 0; l < ts.scales.size(); ++l) {
    e.tensors.push_back({"scale_" + std::to_string(l), ts.scales[l]});
  }
  return e;
}

TokenSet FromEntry(MagtEntry& e) {
  TokenSet ts;
  ts.id = e.id;
  ts.kind = ParseTokenKind(e.kind);
  ts.geo = {e.east, e.north};
  for (std::size_t l = 0; l < e.tensors.size(); ++l) {
    if (e.tensors[l].name != "scale_" + std::to_string(l)) {
      throw FormatError("entry '" + e.id + "': expected tensor scale_" +
                        std::to_string(l) + ", found '" + e.tensors[l].name +
                        "'");
    }
    ts.scales.push_back(std::move(e.tensors[l].data));
  }
  return ts;
}

Split ParseSplit(const MagtEntry& e) {
  if (!e.split) throw FormatError("ground entry '" + e.id + "' has no split");
  if (*e.split == "train") return Split::kTrain;
  if (*e.split == "test") return Split::kTest;
  throw FormatError("ground entry '" + e.id + "' has unknown split '" +
                    *e.split + "'");
}

}  // namespace

std::uint64_t SaveTokenFile(const TokenDataset& dataset,
                            const std::filesystem::path& path, double tau_p) {
  ThrowIfInvalid(dataset, tau_p);
  MagtFile file;
  for (const GroundObservation& g : dataset.ground) {
    MagtEntry image = ToEntry(g.image);
    MagtEntry lidar = ToEntry(g.lidar);
    image.split = lidar.split = std::string(ToString(g.split));
    file.entries.push_back(std::move(image));
    file.entries.push_back(std::move(lidar));
  }
  for (const AerialReference& a : dataset.aerial) {
    MagtEntry e = ToEntry(a.tokens);
    e.modality_tag = a.modality_tag;
    file.entries.push_back(std::move(e));
  }
  return WriteMagt(file, path);
}

TokenDataset LoadTokenFile(const std::filesystem::path& path, double tau_p) {
  MagtFile file = ReadMagt(path);
  TokenDataset dataset;
  // lidar entries are paired with the image entry of the same id
  std::map<std::string, std::size_t> image_index;
  std::vector<bool> has_lidar;
  for (MagtEntry& e : file.entries) {
    const TokenKind kind = ParseTokenKind(e.kind);
    if (kind == TokenKind::kAerial) {
      AerialReference ref;
      ref.modality_tag = e.modality_tag.value_or("");
      ref.tokens = FromEntry(e);
      dataset.aerial.push_back(std::move(ref));
      continue;
    }
    const Split split = ParseSplit(e);
    auto it = image_index.find(e.id);
    if (kind == TokenKind::kGroundImage) {
      if (it != image_index.end()) {
        throw ValidationError("dataset violates 'duplicate-id' at id '" + e.id +
                              "'");
      }
      GroundObservation g;
      g.split = split;
      g.image = FromEntry(e);
      image_index.emplace(g.image.id, dataset.ground.size());
      dataset.ground.push_back(std::move(g));
      has_lidar.push_back(false);
    } else {
      if (it == image_index.end() || has_lidar[it->second]) {
        throw ValidationError("dataset violates 'unpaired-modality' at id '" +
                              e.id + "'");
      }
      dataset.ground[it->second].lidar = FromEntry(e);
      has_lidar[it->second] = true;
    }
  }
  for (std::size_t i = 0; i < has_lidar.size(); ++i) {
    if (!has_lidar[i]) {
      throw ValidationError("dataset violates 'unpaired-modality' at id '" +
                            dataset.ground[i].id() + "'");
    }
  }
  ThrowIfInvalid(dataset, tau_p);
  return dataset;
}

}  // namespace MAGVLAQ_ABI
}  // namespace magvlaq
