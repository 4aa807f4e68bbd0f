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


#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "magvlaq/errors.h"
#include "magvlaq/numerics/mlp.h"
#include "magvlaq/tokens/synthetic.h"
#include "magvlaq/training/training.h"
#include "test_util.h"

namespace magvlaq {
namespace {

AerialReference At(const std::string& id, double east, double north) {
  AerialReference a;
  a.tokens = {id, TokenKind::kAerial, {east, north}, {DenseMatrix(1, 2)}};
  a.modality_tag = "satellite";
  return a;
}

TEST(MinePairsTest, ThreeZonePartition) {
  const std::vector<AerialReference> refs = {At("a", 5, 0), At("b", 15, 0), At("c", 30, 0)};
  const MinedPairs p = MinePairs({0, 0}, refs, {10, 25});
  EXPECT_EQ(p.positives, std::vector<std::size_t>{0});
  EXPECT_EQ(p.negatives, std::vector<std::size_t>{2});
}

TEST(MinePairsTest, BoundariesAreExcluded) {
  const std::vector<AerialReference> refs = {At("p", 10, 0), At("n", 0, 25)};
  const MinedPairs p = MinePairs({0, 0}, refs, {10, 25});
  EXPECT_TRUE(p.positives.empty());
  EXPECT_TRUE(p.negatives.empty());
}

TEST(MinePairsTest, MatchesLoopOracleAndNeverOverlaps) {
  Rng rng = NamedRng(3, "geo");
  std::uniform_real_distribution<double> u(-60, 60);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<AerialReference> refs;
    for (int j = 0; j < 40; ++j) refs.push_back(At("r" + std::to_string(j), u(rng), u(rng)));
    const GeoPoint q{u(rng), u(rng)};
    const MinedPairs p = MinePairs(q, refs, {10, 25});
    std::vector<std::size_t> pos, neg;
    for (std::size_t j = 0; j < refs.size(); ++j) {
      const double d = std::hypot(refs[j].geo().east - q.east, refs[j].geo().north - q.north);
      if (d < 10) pos.push_back(j);
      if (d > 25) neg.push_back(j);
    }
    EXPECT_EQ(p.positives, pos);
    EXPECT_EQ(p.negatives, neg);
    for (std::size_t j : p.positives) {
      EXPECT_EQ(std::count(p.negatives.begin(), p.negatives.end(), j), 0);
    }
  }
}

TEST(MinePairsTest, ThresholdsMustBeOrdered) {
  EXPECT_THROW((MiningThresholds{10, 10}.Validate()), ConfigError);
  EXPECT_THROW((MiningThresholds{0, 5}.Validate()), ConfigError);
}

GroundObservation Query(const std::string& id, double east, Split split = Split::kTrain) {
  GroundObservation g;
  g.image = {id, TokenKind::kGroundImage, {east, 0}, {DenseMatrix(1, 2)}};
  g.lidar = {id, TokenKind::kGroundLidar, {east, 0}, {DenseMatrix(1, 2)}};
  g.split = split;
  return g;
}

TEST(SampleTripletsTest, UniqueTriplet) {
  TokenDataset ds;
  ds.ground.push_back(Query("q", 0));
  ds.aerial = {At("pos", 3, 0), At("mid", 18, 0), At("neg", 40, 0)};
  const TripletBatch b = SampleTriplets(ds, nullptr, {}, MiningStrategy::kRandom, 16, 1);
  ASSERT_EQ(b.triplets.size(), 1u);
  EXPECT_EQ(b.triplets[0], (Triplet{0, 0, 2}));
  EXPECT_EQ(b.orphans, 0u);
}

TEST(SampleTripletsTest, OrphansAreSkippedAndCounted) {
  TokenDataset ds;
  ds.ground = {Query("q", 0), Query("lonely", 500), Query("test", 500, Split::kTest)};
  ds.aerial = {At("pos", 3, 0), At("neg", 40, 0)};
  const TripletBatch b = SampleTriplets(ds, nullptr, {}, MiningStrategy::kRandom, 16, 1);
  EXPECT_EQ(b.triplets.size(), 1u);
  EXPECT_EQ(b.orphans, 1u);
}

TEST(SampleTripletsTest, DeterministicAndMined) {
  SynthConfig s;
  s.num_places = 9;
  s.tokens_per_scale = 2;
  s.aerial_tokens = 2;
  s.raw_dim = 3;
  s.scales = 1;
  const TokenDataset ds = GenerateSyntheticDataset(s, 1);
  const TripletBatch a = SampleTriplets(ds, nullptr, {}, MiningStrategy::kRandom, 4, 9);
  const TripletBatch b = SampleTriplets(ds, nullptr, {}, MiningStrategy::kRandom, 4, 9);
  const TripletBatch c = SampleTriplets(ds, nullptr, {}, MiningStrategy::kRandom, 4, 10);
  EXPECT_EQ(a.triplets, b.triplets);
  EXPECT_NE(a.triplets, c.triplets);
  EXPECT_EQ(a.triplets.size(), 27u);
  EXPECT_EQ(a.num_batches(), 7u);
  EXPECT_EQ(a.batch(6).size(), 3u);
  for (const Triplet& t : a.triplets) {
    EXPECT_EQ(ds.ground[t.query].split, Split::kTrain);
    EXPECT_LT(GeoDistance(ds.ground[t.query].geo(), ds.aerial[t.positive].geo()), 10);
    EXPECT_GT(GeoDistance(ds.ground[t.query].geo(), ds.aerial[t.negative].geo()), 25);
  }
}

TEST(SampleTripletsTest, HardestNegativeMatchesExhaustiveArgmin) {
  SynthConfig s;
  s.num_places = 16;
  s.tokens_per_scale = 2;
  s.aerial_tokens = 2;
  s.raw_dim = 3;
  s.scales = 1;
  const TokenDataset ds = GenerateSyntheticDataset(s, 2);
  const MiningDescriptors desc{testing::Random(ds.ground.size(), 5, 1, 1.0, "g"),
                               testing::Random(ds.aerial.size(), 5, 1, 1.0, "a")};
  const TripletBatch b =
      SampleTriplets(ds, &desc, {}, MiningStrategy::kHardestNegative, 16, 4);
  ASSERT_FALSE(b.triplets.empty());
  for (const Triplet& t : b.triplets) {
    double best = INFINITY;
    std::size_t arg = 0;
    for (std::size_t j = 0; j < ds.aerial.size(); ++j) {
      if (GeoDistance(ds.ground[t.query].geo(), ds.aerial[j].geo()) <= 25) continue;
      double d = 0;
      for (std::size_t k = 0; k < 5; ++k) {
        const double diff = desc.ground(t.query, k) - desc.aerial(j, k);
        d += diff * diff;
      }
      if (d < best) {
        best = d;
        arg = j;
      }
    }
    EXPECT_EQ(t.negative, arg);
  }
  EXPECT_THROW(SampleTriplets(ds, nullptr, {}, MiningStrategy::kHardestNegative, 16, 4),
               ContractError);
}

Scalar Eval(Var v) { return v.value()[0]; }

TEST(TripletLossTest, Examples) {
  Graph g;
  const DistanceTriplet t[] = {{0, 0, 1}};
  EXPECT_FLOAT_EQ(Eval(TripletLoss(g.Constant(DenseMatrix::FromRows({{0.2f, 0.5f}})), t, 0.1)), 0);
  EXPECT_NEAR(Eval(TripletLoss(g.Constant(DenseMatrix::FromRows({{0.5f, 0.2f}})), t, 0.1)), 0.4, 1e-6);
  EXPECT_THROW(TripletLoss(g.Constant(DenseMatrix(1, 2)), {}, 0.1), ContractError);
}

TEST(TripletLossTest, KinkHasZeroGradient) {
  Graph g;
  Var d = g.Input(DenseMatrix::FromRows({{0.3f, 0.3f}}));
  const DistanceTriplet t[] = {{0, 0, 1}};
  Var loss = TripletLoss(d, t, 0.0);
  EXPECT_EQ(Eval(loss), 0);
  g.Backward(loss);
  EXPECT_EQ(g.grad(d), DenseMatrix(1, 2));
}

TEST(TripletLossTest, NonNegativeAndZeroIffMarginsHold) {
  Rng rng = NamedRng(5, "d");
  std::uniform_real_distribution<double> u(0, 2);
  for (int trial = 0; trial < 200; ++trial) {
    DenseMatrix d(3, 4);
    for (Scalar& v : d.data()) v = static_cast<Scalar>(u(rng));
    const DistanceTriplet t[] = {{0, 0, 1}, {1, 2, 3}, {2, 1, 0}};
    Graph g;
    const double loss = Eval(TripletLoss(g.Constant(d), t, 0.1));
    bool all_hold = true;
    for (const auto& x : t) all_hold &= d(x.row, x.negative) >= d(x.row, x.positive) + Scalar(0.1);
    EXPECT_GE(loss, 0);
    EXPECT_EQ(loss == 0, all_hold);
  }
}

TEST(AuxLossTest, Examples) {
  Graph g;
  // one far pair at descriptor distance 0 → [2m − 0]_+ = 0.2
  Var q = g.Constant(DenseMatrix::FromRows({{1, 0}}));
  const Var domains[] = {q};
  const AuxLoss far = AuxConsistencyLoss(domains, q, DenseMatrix(1, 1, 100), {}, 0.1);
  EXPECT_NEAR(Eval(far.value), 0.2, 1e-6);
  EXPECT_EQ(far.terms, 1u);
  // close pair already within margin
  Var a = g.Constant(DenseMatrix::FromRows({{1, 0.05f}}));
  EXPECT_EQ(Eval(AuxConsistencyLoss(domains, a, DenseMatrix(1, 1, 2), {}, 0.1).value), 0);
  // ignore band only → no eligible pairs
  const AuxLoss none = AuxConsistencyLoss(domains, a, DenseMatrix(1, 1, 15), {}, 0.1);
  EXPECT_EQ(none.terms, 0u);
  EXPECT_EQ(Eval(none.value), 0);
}

TEST(AuxLossTest, MeanOverContributingTermsAcrossDomains) {
  Graph g;
  const DenseMatrix geo = DenseMatrix::FromRows({{3, 40}, {40, 3}});
  Var aerial = g.Constant(testing::Random(2, 4, 1));
  Var d1 = g.Constant(testing::Random(2, 4, 2));
  Var d2 = g.Constant(testing::Random(2, 4, 3));
  const Var one[] = {d1};
  const Var two[] = {d1, d2};
  const Var other[] = {d2};
  const double l1 = Eval(AuxConsistencyLoss(one, aerial, geo, {}, 0.1).value);
  const double l2 = Eval(AuxConsistencyLoss(other, aerial, geo, {}, 0.1).value);
  const AuxLoss both = AuxConsistencyLoss(two, aerial, geo, {}, 0.1);
  EXPECT_EQ(both.terms, 8u);
  EXPECT_NEAR(Eval(both.value), (l1 + l2) / 2, 1e-6);
}

TEST(QueryShiftRegularizerTest, Examples) {
  Graph g;
  const Var zero[] = {g.Constant(DenseMatrix(2, 2)), g.Constant(DenseMatrix(2, 2))};
  EXPECT_EQ(Eval(QueryShiftRegularizer(zero)), 0);
  const Var ones[] = {g.Constant(DenseMatrix(2, 2, 1))};
  EXPECT_EQ(Eval(QueryShiftRegularizer(ones)), 4);
  EXPECT_THROW(QueryShiftRegularizer({}), ContractError);
}

TEST(QueryShiftRegularizerTest, GradientIsTwoShiftOverB) {
  Graph g;
  const DenseMatrix a = testing::Random(2, 3, 1), b = testing::Random(2, 3, 2);
  const Var shifts[] = {g.Input(a), g.Input(b)};
  g.Backward(QueryShiftRegularizer(shifts));
  const DenseMatrix ga = g.grad(shifts[0]);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(ga[k], a[k], 1e-6);
}

TEST(TotalLossTest, WeightedSum) {
  Graph g;
  auto c = [&](double v) { return g.Constant(DenseMatrix(1, 1, static_cast<Scalar>(v))); };
  EXPECT_FLOAT_EQ(Eval(TotalLoss({c(0.7), c(5), c(9)}, {1, 0, 0, 0.1})), 0.7f);
  EXPECT_FLOAT_EQ(Eval(TotalLoss({c(1), c(1), c(1)}, {1, 1, 1, 0.1})), 3.0f);
  EXPECT_NEAR(Eval(TotalLoss({c(0.5), c(2), c(3)}, {2, 0.25, 1e-3, 0.1})),
              2 * 0.5 + 0.25 * 2 + 1e-3 * 3, 1e-6);
}

TEST(TotalLossTest, NonFiniteTermIsNamed) {
  Graph g;
  auto c = [&](double v) { return g.Constant(DenseMatrix(1, 1, static_cast<Scalar>(v))); };
  try {
    TotalLoss({c(1), c(NAN), c(0)}, {});
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("l_aux"), std::string::npos);
  }
}

TEST(AdamTest, ZeroGradientsOnlyAdvanceTheStep) {
  ParamStore store;
  store.Add("w", DenseMatrix::FromRows({{1, -2}}));
  AdamStep(store, {});
  EXPECT_EQ(store.at("w").value, DenseMatrix::FromRows({{1, -2}}));
  EXPECT_EQ(store.at("w").first_moment, DenseMatrix(1, 2));
  EXPECT_EQ(store.step(), 1u);
}

TEST(AdamTest, FirstStepMovesByLearningRate) {
  ParamStore store;
  store.Add("w", DenseMatrix(1, 1, 0.5f));
  store.at("w").grad[0] = 1;
  AdamStep(store, {0.1, 0.9, 0.999, 1e-8});
  EXPECT_NEAR(store.at("w").value[0], 0.5 - 0.1 / (1 + 1e-8), 1e-6);
  EXPECT_EQ(store.at("w").grad[0], 0);
}

TEST(AdamTest, RepeatedGradientKeepsDirection) {
  ParamStore store;
  store.Add("w", DenseMatrix(1, 1));
  double prev_delta = 0;
  for (int step = 0; step < 2; ++step) {
    const double before = store.at("w").value[0];
    store.at("w").grad[0] = 1;
    AdamStep(store, {0.1, 0.9, 0.999, 1e-8});
    const double delta = store.at("w").value[0] - before;
    EXPECT_LT(delta, 0);
    if (step > 0) EXPECT_LE(std::abs(delta), std::abs(prev_delta) + 1e-7);
    prev_delta = delta;
  }
}

TEST(AdamTest, NanGradientLeavesStateIntact) {
  ParamStore store;
  store.Add("a", DenseMatrix(1, 1, 1));
  store.Add("b", DenseMatrix(1, 1, 2));
  store.at("a").grad[0] = 1;
  store.at("b").grad[0] = NAN;
  try {
    AdamStep(store, {});
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos);
  }
  EXPECT_EQ(store.at("a").value[0], 1);
  EXPECT_EQ(store.step(), 0u);
  EXPECT_THROW(AdamStep(store, {0.1, 1.0, 0.9, 1e-8}), ConfigError);
}

TEST(AdamTest, RegularizerAloneShrinksTheShiftMonotonically) {
  // λ_q only, frozen input: ‖ΔC‖ must decay step after step.
  ParamStore store;
  const std::size_t dims[] = {3, 4, 6};
  InitMlp(store, kShiftNet, dims, 2);
  for (auto& [name, p] : store) p.value = testing::Perturbed(p.value, 1, 0.3);
  const DenseMatrix e = testing::Random(1, 3, 7);
  double prev = INFINITY;
  for (int step = 0; step < 30; ++step) {
    Graph g;
    const Var shift[] = {PredictQueryShift(g, store, g.Constant(e), {2, 3, 1})};
    Var lq = QueryShiftRegularizer(shift);
    const double norm = Eval(lq);
    EXPECT_LT(norm, prev) << step;
    prev = norm;
    g.Backward(Scale(lq, 1.0f));
    AdamStep(store, {1e-2, 0.9, 0.999, 1e-8});
  }
}

ModelConfig TinyModel(Aggregator agg) {
  ModelConfig c;
  c.raw_dim = 6;
  c.vlaq = {4, 8, 8};
  c.fusion_dim = 8;
  c.scales = 2;
  c.ode_steps = 2;
  c.aggregator = agg;
  return c;
}

TokenDataset TinyData(double noise = 0.1) {
  SynthConfig s;
  s.num_places = 6;
  s.observations_per_place = 3;
  s.scales = 2;
  s.tokens_per_scale = 6;
  s.aerial_tokens = 5;
  s.raw_dim = 6;
  s.latent_dim = 3;
  s.noise = noise;
  return GenerateSyntheticDataset(s, 4);
}

TEST(TrainEpochTest, ZeroLearningRateIsBitIdentical) {
  Model m(TinyModel(Aggregator::kOdeVlaq), 1);
  const ParamStore before = m.params();
  TrainConfig c;
  c.optimizer.learning_rate = 0;
  c.batch_size = 4;
  const TokenDataset ds = TinyData();
  TrainEpoch(m, ds, c, 0);
  TrainEpoch(m, ds, c, 1);
  for (const auto& [name, p] : before) EXPECT_EQ(m.params().at(name).value, p.value) << name;
}

TEST(TrainEpochTest, OneEpochDecreasesLossOnNoiselessData) {
  Model m(TinyModel(Aggregator::kOdeVlaq), 2);
  TrainConfig c;
  c.batch_size = 4;
  c.optimizer.learning_rate = 1e-2;
  const TokenDataset ds = TinyData(0.0);
  // loss at epoch 0 measured without updates
  TrainConfig frozen = c;
  frozen.optimizer.learning_rate = 0;
  Model probe(TinyModel(Aggregator::kOdeVlaq), 2);
  const double before = TrainEpoch(probe, ds, frozen, 0).total;
  TrainEpoch(m, ds, c, 0);
  probe = m;
  const double after = TrainEpoch(probe, ds, frozen, 0).total;
  EXPECT_LT(after, before);
}

TEST(TrainEpochTest, DeterministicMetricTraces) {
  const TokenDataset ds = TinyData();
  TrainConfig c;
  c.batch_size = 5;
  std::vector<double> runs[2];
  for (auto& trace : runs) {
    Model m(TinyModel(Aggregator::kOdeVlaq), 3);
    for (std::size_t e = 0; e < 3; ++e) {
      const EpochMetrics em = TrainEpoch(m, ds, c, e);
      trace.insert(trace.end(), {em.l_tri, em.l_aux, em.l_q, em.total});
      EXPECT_EQ(em.steps, 3u);
    }
  }
  EXPECT_EQ(runs[0], runs[1]);
}

TEST(TrainEpochTest, EmptyTrainSplitIsAnError) {
  TokenDataset ds = TinyData();
  for (auto& g : ds.ground) g.split = Split::kTest;
  Model m(TinyModel(Aggregator::kStaticVlaq), 1);
  EXPECT_THROW(TrainEpoch(m, ds, {}, 0), ContractError);
}

}  // namespace
}  // namespace magvlaq
