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


#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "magvlaq/errors.h"
#include "magvlaq/tokens/magt.h"
#include "magvlaq/tokens/synthetic.h"
#include "magvlaq/tokens/token_set.h"
#include "test_util.h"

namespace magvlaq {
namespace {

namespace fs = std::filesystem;

SynthConfig Small() {
  SynthConfig c;
  c.num_places = 3;
  c.observations_per_place = 2;
  c.scales = 2;
  c.tokens_per_scale = 5;
  c.aerial_tokens = 4;
  c.raw_dim = 6;
  c.latent_dim = 3;
  return c;
}

fs::path TempPath(const std::string& name) {
  return fs::temp_directory_path() /
         (name + "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
}

void ExpectSameDataset(const TokenDataset& a, const TokenDataset& b) {
  ASSERT_EQ(a.ground.size(), b.ground.size());
  ASSERT_EQ(a.aerial.size(), b.aerial.size());
  for (std::size_t i = 0; i < a.ground.size(); ++i) {
    EXPECT_EQ(a.ground[i].id(), b.ground[i].id());
    EXPECT_EQ(a.ground[i].split, b.ground[i].split);
    EXPECT_EQ(a.ground[i].geo(), b.ground[i].geo());
    EXPECT_EQ(a.ground[i].image.scales, b.ground[i].image.scales);
    EXPECT_EQ(a.ground[i].lidar.scales, b.ground[i].lidar.scales);
  }
  for (std::size_t j = 0; j < a.aerial.size(); ++j) {
    EXPECT_EQ(a.aerial[j].id(), b.aerial[j].id());
    EXPECT_EQ(a.aerial[j].geo(), b.aerial[j].geo());
    EXPECT_EQ(a.aerial[j].modality_tag, b.aerial[j].modality_tag);
    EXPECT_EQ(a.aerial[j].tokens.scales, b.aerial[j].tokens.scales);
  }
}

std::vector<std::uint8_t> ReadBytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

void WriteBytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(p, std::ios::binary);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
}

// Rewrites the JSON header in place, padding with spaces to keep its length.
void EditHeader(std::vector<std::uint8_t>& bytes,
                const std::function<void(nlohmann::json&)>& edit) {
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, 8);
  std::string text(bytes.begin() + 16, bytes.begin() + 16 + static_cast<long>(len));
  nlohmann::json j = nlohmann::json::parse(text);
  edit(j);
  std::string out = j.dump();
  ASSERT_LE(out.size(), len);
  out.resize(len, ' ');
  std::copy(out.begin(), out.end(), bytes.begin() + 16);
}

TEST(TokenFileTest, EmptyDatasetRoundTrips) {
  const fs::path p = TempPath("empty.magt");
  SaveTokenFile(TokenDataset{}, p);
  const TokenDataset back = LoadTokenFile(p);
  EXPECT_TRUE(back.ground.empty());
  EXPECT_TRUE(back.aerial.empty());
}

TEST(TokenFileTest, RoundTripIsBitExact) {
  const TokenDataset ds = GenerateSyntheticDataset(Small(), 3);
  const fs::path p = TempPath("rt.magt");
  const std::uint64_t bytes = SaveTokenFile(ds, p);
  EXPECT_EQ(bytes, fs::file_size(p));
  ExpectSameDataset(ds, LoadTokenFile(p));
}

TEST(TokenFileTest, OneGroundOneAerialRoundTrips) {
  TokenDataset ds;
  GroundObservation g;
  g.image = {"q", TokenKind::kGroundImage, {1.5, -2.25}, {testing::Random(3, 4, 1)}};
  g.lidar = {"q", TokenKind::kGroundLidar, {1.5, -2.25}, {testing::Random(2, 4, 2)}};
  ds.ground.push_back(g);
  AerialReference a;
  a.tokens = {"r", TokenKind::kAerial, {0, 0}, {testing::Random(5, 4, 3)}};
  a.modality_tag = "roadmap";
  ds.aerial.push_back(a);
  const fs::path p = TempPath("one.magt");
  SaveTokenFile(ds, p);
  ExpectSameDataset(ds, LoadTokenFile(p));
}

TEST(MagtTest, BadMagic) {
  const fs::path p = TempPath("magic.magt");
  SaveTokenFile(GenerateSyntheticDataset(Small(), 1), p);
  auto bytes = ReadBytes(p);
  bytes[0] = 'X';
  WriteBytes(p, bytes);
  EXPECT_THROW(LoadTokenFile(p), BadMagicError);
}

TEST(MagtTest, UnsupportedVersion) {
  auto bytes = EncodeMagt(MagtFile{});
  bytes[4] = 2;
  EXPECT_THROW(DecodeMagt(bytes), UnsupportedVersionError);
}

TEST(MagtTest, Truncation) {
  MagtFile f;
  f.entries.push_back({"e", "params", 0, 0, {}, {}, {{"value", DenseMatrix(2, 2)}}});
  auto bytes = EncodeMagt(f);
  bytes.resize(bytes.size() - 4);
  EXPECT_THROW(DecodeMagt(bytes), TruncatedFileError);
  bytes.resize(10);
  EXPECT_THROW(DecodeMagt(bytes), TruncatedFileError);
}

TEST(MagtTest, OverlappingOffsetsAreCorruption) {
  MagtFile f;
  f.entries.push_back({"e", "params", 0, 0, {}, {},
                       {{"a", DenseMatrix(2, 2)}, {"b", DenseMatrix(2, 2)}}});
  auto bytes = EncodeMagt(f);
  EditHeader(bytes, [](nlohmann::json& j) { j["entries"][0]["tensors"][1]["offset"] = 4; });
  EXPECT_THROW(DecodeMagt(bytes), CorruptionError);
}

TEST(MagtTest, MisalignedOffsetIsCorruption) {
  MagtFile f;
  f.entries.push_back({"e", "params", 0, 0, {}, {}, {{"a", DenseMatrix(1, 1)}}});
  auto bytes = EncodeMagt(f);
  EditHeader(bytes, [](nlohmann::json& j) { j["entries"][0]["tensors"][0]["offset"] = 2; });
  EXPECT_THROW(DecodeMagt(bytes), CorruptionError);
}

TEST(MagtTest, ErrorsCarryThePath) {
  const fs::path p = TempPath("missing.magt");
  fs::remove(p);
  try {
    ReadMagt(p);
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find(p.string()), std::string::npos);
  }
}

TEST(MagtTest, MetaRoundTrips) {
  MagtFile f;
  f.meta = {{"step", 12}, {"name", "x"}};
  EXPECT_EQ(DecodeMagt(EncodeMagt(f)).meta, f.meta);
}

TEST(ValidateTest, SyntheticDatasetIsValid) {
  EXPECT_TRUE(ValidateDataset(GenerateSyntheticDataset(SynthConfig{}, 7)).empty());
}

TEST(ValidateTest, DuplicateId) {
  TokenDataset ds = GenerateSyntheticDataset(Small(), 1);
  ds.aerial[1].tokens.id = ds.aerial[0].tokens.id;
  const auto v = ValidateDataset(ds);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].rule, "duplicate-id");
}

TEST(ValidateTest, OrphanQuery) {
  TokenDataset ds = GenerateSyntheticDataset(Small(), 1);
  GroundObservation lone = ds.ground[0];
  lone.image.id = lone.lidar.id = "lonely";
  lone.image.geo = lone.lidar.geo = {1000, 1000};
  ds.ground.push_back(lone);
  const auto v = ValidateDataset(ds);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].rule, "orphan-query");
  EXPECT_EQ(v[0].id, "lonely");
}

TEST(ValidateTest, StructuralRules) {
  TokenDataset ds = GenerateSyntheticDataset(Small(), 1);
  ds.ground[0].lidar.geo.east += 1;
  ds.ground[1].lidar.scales.pop_back();
  ds.ground[2].image.scales[0] = DenseMatrix(5, 7);
  ds.aerial[0].modality_tag = "roadmap";
  ds.aerial[1].tokens.kind = TokenKind::kGroundImage;
  ds.aerial[2].tokens.scales[0](0, 0) = std::numeric_limits<Scalar>::infinity();
  std::set<std::string> rules;
  for (const auto& v : ValidateDataset(ds)) rules.insert(v.rule);
  for (const char* r : {"geo-mismatch", "scale-count-mismatch", "dim-mismatch",
                        "mixed-modality", "wrong-kind", "non-finite-token"}) {
    EXPECT_TRUE(rules.count(r)) << r;
  }
}

TEST(ValidateTest, LoadRejectsMismatchedGeoNamingId) {
  TokenDataset ds = GenerateSyntheticDataset(Small(), 1);
  MagtFile f;
  const GroundObservation& g = ds.ground[0];
  f.entries.push_back({g.id(), "ground-image", 0, 0, "train", {}, {{"scale_0", g.image.scales[0]}}});
  f.entries.push_back({g.id(), "ground-lidar", 3, 0, "train", {}, {{"scale_0", g.lidar.scales[0]}}});
  const fs::path p = TempPath("geo.magt");
  WriteMagt(f, p);
  try {
    LoadTokenFile(p);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find(g.id()), std::string::npos) << e.what();
  }
}

TEST(SaveTest, InvalidDatasetIsRejected) {
  TokenDataset ds = GenerateSyntheticDataset(Small(), 1);
  ds.ground[0].image.scales.clear();
  EXPECT_THROW(SaveTokenFile(ds, TempPath("bad.magt")), ValidationError);
}

TEST(SyntheticTest, SameSeedIsBitIdentical) {
  ExpectSameDataset(GenerateSyntheticDataset(Small(), 5), GenerateSyntheticDataset(Small(), 5));
  EXPECT_NE(GenerateSyntheticDataset(Small(), 5).aerial[0].tokens.scales,
            GenerateSyntheticDataset(Small(), 6).aerial[0].tokens.scales);
}

TEST(SyntheticTest, ConfigGuards) {
  SynthConfig c = Small();
  c.num_places = 1;
  EXPECT_THROW(GenerateSyntheticDataset(c, 1), ConfigError);
  c = Small();
  c.place_spacing_m = 25;
  EXPECT_THROW(GenerateSyntheticDataset(c, 1), ConfigError);
  c = Small();
  c.test_per_place = c.observations_per_place;
  EXPECT_THROW(GenerateSyntheticDataset(c, 1), ConfigError);
}

TEST(SyntheticTest, JitterStaysInsideHalfTauP) {
  SynthConfig c;
  c.num_places = 9;
  c.observations_per_place = 40;
  c.tokens_per_scale = 1;
  c.aerial_tokens = 1;
  c.raw_dim = 2;
  c.scales = 1;
  SynthTruth truth;
  const TokenDataset ds = GenerateSyntheticDataset(c, 2, &truth);
  for (std::size_t i = 0; i < ds.ground.size(); ++i) {
    const GeoPoint center = ds.aerial[truth.ground_place[i]].geo();
    EXPECT_LT(GeoDistance(ds.ground[i].geo(), center), c.tau_p / 2);
  }
}

using EigenMat = Eigen::MatrixXd;

EigenMat ToEigen(const DenseMatrix& m) {
  EigenMat out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = m(r, c);
  return out;
}

Eigen::VectorXd Flatten(const DenseMatrix& m) {
  Eigen::VectorXd v(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) v(i) = m[i];
  return v;
}

// Least-squares latent recovered from tokens through a known linear map.
Eigen::VectorXd Recover(const DenseMatrix& map, const DenseMatrix& tokens, double* residual) {
  const EigenMat a = ToEigen(map);
  const Eigen::VectorXd b = Flatten(tokens);
  const Eigen::VectorXd u = a.colPivHouseholderQr().solve(b);
  if (residual) *residual = (a * u - b).cwiseAbs().maxCoeff();
  return u;
}

TEST(SyntheticTest, NoiselessTokensShareTheLatentOfTheirAerial) {
  SynthConfig c = Small();
  c.noise = 0;
  SynthTruth truth;
  const TokenDataset ds = GenerateSyntheticDataset(c, 9, &truth);
  for (std::size_t i = 0; i < ds.ground.size(); ++i) {
    const std::size_t k = truth.ground_place[i];
    double r_img = 0, r_pc = 0, r_aer = 0;
    const auto u_img = Recover(truth.image_maps[1], ds.ground[i].image.scales[1], &r_img);
    const auto u_pc = Recover(truth.lidar_maps[0], ds.ground[i].lidar.scales[0], &r_pc);
    const auto u_aer = Recover(truth.aerial_map, ds.aerial[k].tokens.scales[0], &r_aer);
    EXPECT_LT(r_img, 1e-5);
    EXPECT_LT(r_pc, 1e-5);
    EXPECT_LT(r_aer, 1e-5);
    EXPECT_LT((u_img - u_aer).norm(), 1e-5);
    EXPECT_LT((u_pc - u_aer).norm(), 1e-5);
  }
}

TEST(SyntheticTest, LatentProbeOracleRetrievesEveryTestQuery) {
  SynthTruth truth;
  const TokenDataset ds = GenerateSyntheticDataset(SynthConfig{}, 7, &truth);
  std::vector<Eigen::VectorXd> aerial;
  for (const auto& a : ds.aerial) aerial.push_back(Recover(truth.aerial_map, a.tokens.last_scale(), nullptr));
  std::size_t hits = 0, total = 0;
  for (std::size_t i = 0; i < ds.ground.size(); ++i) {
    if (ds.ground[i].split != Split::kTest) continue;
    const auto u = Recover(truth.image_maps.back(), ds.ground[i].image.last_scale(), nullptr);
    std::size_t best = 0;
    for (std::size_t j = 1; j < aerial.size(); ++j) {
      if ((aerial[j] - u).norm() < (aerial[best] - u).norm()) best = j;
    }
    ++total;
    hits += GeoDistance(ds.ground[i].geo(), ds.aerial[best].geo()) <= 25.0 ? 1 : 0;
  }
  EXPECT_EQ(total, 16u);
  EXPECT_EQ(hits, total);
}

}  // namespace
}  // namespace magvlaq
