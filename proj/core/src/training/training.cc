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


#include "magvlaq/training/training.h"

#include <algorithm>
#include <chrono>
#include <limits>
#include <cmath>
#include <numeric>
#include <random>

#include "magvlaq/errors.h"
#include "magvlaq/numerics/random.h"

namespace magvlaq {
inline namespace MAGVLAQ_ABI {

void MiningThresholds::Validate() const {
  if (!(tau_p > 0) || !(tau_n > tau_p) || !std::isfinite(tau_n)) {
    throw ConfigError("mining thresholds need 0 < tau_p < tau_n (got " +
                      std::to_string(tau_p) + ", " + std::to_string(tau_n) + ")");
  }
}

MinedPairs MinePairs(GeoPoint query, std::span<const AerialReference> aerials,
                     const MiningThresholds& th) {
  th.Validate();
  MinedPairs out;
  for (std::size_t j = 0; j < aerials.size(); ++j) {
    const double d = GeoDistance(query, aerials[j].geo());
    if (d < th.tau_p) {
      out.positives.push_back(j);
    } else if (d > th.tau_n) {
      out.negatives.push_back(j);
    }
  }
  return out;
}

std::span<const Triplet> TripletBatch::batch(std::size_t k) const {
  if (k >= num_batches()) {
    throw ContractError("batch " + std::to_string(k) + " of " +
                        std::to_string(num_batches()));
  }
  const std::size_t begin = k * batch_size;
  const std::size_t end = std::min(triplets.size(), begin + batch_size);
  return std::span<const Triplet>(triplets).subspan(begin, end - begin);
}

namespace {

double RowDistanceSquared(const DenseMatrix& a, std::size_t i,
                          const DenseMatrix& b, std::size_t j) {
  Accum s = 0;
  auto ra = a.row(i);
  auto rb = b.row(j);
  for (std::size_t c = 0; c < ra.size(); ++c) {
    const Accum d = Accum(ra[c]) - Accum(rb[c]);
    s += d * d;
  }
  return static_cast<double>(s);
}

std::size_t Pick(std::size_t n, Rng& rng) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace

TripletBatch SampleTriplets(const TokenDataset& dataset,
                            const MiningDescriptors* descriptors,
                            const MiningThresholds& th, MiningStrategy strategy,
                            std::size_t batch_size, std::uint64_t seed) {
  th.Validate();
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (strategy == MiningStrategy::kHardestNegative) {
    if (descriptors == nullptr ||
        descriptors->ground.rows() != dataset.ground.size() ||
        descriptors->aerial.rows() != dataset.aerial.size()) {
      throw ContractError(
          "hardest-negative mining needs one descriptor per ground and aerial "
          "entry");
    }
  }
  std::vector<std::size_t> queries;
  for (std::size_t i = 0; i < dataset.ground.size(); ++i) {
    if (dataset.ground[i].split == Split::kTrain) queries.push_back(i);
  }
  Rng rng = NamedRng(seed, "triplets");
  std::shuffle(queries.begin(), queries.end(), rng);

  TripletBatch out;
  out.batch_size = batch_size;
  for (std::size_t q : queries) {
    const MinedPairs pairs = MinePairs(dataset.ground[q].geo(), dataset.aerial, th);
    if (pairs.positives.empty() || pairs.negatives.empty()) {
      ++out.orphans;
      continue;
    }
    Triplet t;
    t.query = q;
    t.positive = pairs.positives[Pick(pairs.positives.size(), rng)];
    if (strategy == MiningStrategy::kRandom) {
      t.negative = pairs.negatives[Pick(pairs.negatives.size(), rng)];
    } else {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t j : pairs.negatives) {
        const double d =
            RowDistanceSquared(descriptors->ground, q, descriptors->aerial, j);
        if (d < best) {
          best = d;
          t.negative = j;
        }
      }
    }
    out.triplets.push_back(t);
  }
  return out;
}

void LossWeights::Validate() const {
  for (double v : {lambda_tri, lambda_aux, lambda_q, margin}) {
    if (!(v >= 0) || !std::isfinite(v)) {
      throw ConfigError("loss weights and margin must be finite and >= 0");
    }
  }
}

Var TripletLoss(Var distances, std::span<const DistanceTriplet> triplets,
                double margin) {
  if (triplets.empty()) throw ContractError("triplet loss of an empty batch");
  std::vector<std::pair<std::size_t, std::size_t>> pos, neg;
  pos.reserve(triplets.size());
  neg.reserve(triplets.size());
  for (const DistanceTriplet& t : triplets) {
    pos.emplace_back(t.row, t.positive);
    neg.emplace_back(t.row, t.negative);
  }
  Var gap = Sub(Gather(distances, pos), Gather(distances, neg));
  return Mean(Relu(AddScalar(gap, static_cast<Scalar>(margin))));
}

AuxLoss AuxConsistencyLoss(std::span<const Var> ground_domains, Var aerial,
                           const DenseMatrix& geo_distance,
                           const MiningThresholds& th, double margin) {
  th.Validate();
  Graph& g = aerial.graph();
  std::vector<std::pair<std::size_t, std::size_t>> close, far;
  for (std::size_t i = 0; i < geo_distance.rows(); ++i) {
    for (std::size_t j = 0; j < geo_distance.cols(); ++j) {
      const double d = geo_distance(i, j);
      if (d < th.tau_p) close.emplace_back(i, j);
      if (d > th.tau_n) far.emplace_back(i, j);
    }
  }
  AuxLoss out;
  out.terms = ground_domains.size() * (close.size() + far.size());
  if (out.terms == 0) {
    out.value = g.Constant(DenseMatrix(1, 1));
    return out;
  }
  std::vector<Var> sums;
  for (Var ground : ground_domains) {
    if (ground.rows() != geo_distance.rows() ||
        aerial.rows() != geo_distance.cols()) {
      throw DimensionError("aux loss: descriptors " + ground.value().ShapeString() +
                           " / " + aerial.value().ShapeString() +
                           " vs geo distances " + geo_distance.ShapeString());
    }
    Var d = PairwiseDistances(ground, aerial);
    if (!close.empty()) {
      sums.push_back(
          Sum(Relu(AddScalar(Gather(d, close), static_cast<Scalar>(-margin)))));
    }
    if (!far.empty()) {
      sums.push_back(Sum(Relu(AddScalar(Scale(Gather(d, far), Scalar{-1}),
                                        static_cast<Scalar>(2 * margin)))));
    }
  }
  Var total = sums.front();
  for (std::size_t k = 1; k < sums.size(); ++k) total = Add(total, sums[k]);
  out.value = Scale(total, static_cast<Scalar>(1.0 / static_cast<double>(out.terms)));
  return out;
}

Var QueryShiftRegularizer(std::span<const Var> shifts) {
  if (shifts.empty()) throw ContractError("query shift regularizer of no shifts");
  Var total = SumSquares(shifts.front());
  for (std::size_t k = 1; k < shifts.size(); ++k) {
    total = Add(total, SumSquares(shifts[k]));
  }
  return Scale(total, static_cast<Scalar>(1.0 / static_cast<double>(shifts.size())));
}

Var TotalLoss(const LossParts& parts, const LossWeights& weights) {
  const std::pair<const char*, Var> named[] = {
      {"l_tri", parts.triplet}, {"l_aux", parts.aux}, {"l_q", parts.shift}};
  for (const auto& [name, v] : named) {
    if (!v.valid() || v.value().rows() != 1 || v.value().cols() != 1) {
      throw ContractError(std::string(name) + " must be a 1x1 loss");
    }
    if (!v.value().AllFinite()) {
      throw DivergenceError(std::string("loss term ") + name + " is not finite");
    }
  }
  Var total = Scale(parts.triplet, static_cast<Scalar>(weights.lambda_tri));
  total = Add(total, Scale(parts.aux, static_cast<Scalar>(weights.lambda_aux)));
  total = Add(total, Scale(parts.shift, static_cast<Scalar>(weights.lambda_q)));
  if (!total.value().AllFinite()) {
    throw DivergenceError("total loss is not finite");
  }
  return total;
}

void OptimizerState::Validate() const {
  if (!(learning_rate >= 0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be finite and >= 0");
  }
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0)) throw ConfigError("adam epsilon must be positive");
}

void AdamStep(ParamStore& params, const OptimizerState& opt) {
  opt.Validate();
  for (const auto& [name, p] : params) {
    if (!p.grad.AllFinite()) {
      throw DivergenceError("gradient of parameter '" + name + "' is not finite");
    }
  }
  const std::uint64_t t = params.step() + 1;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(t));
  for (auto& [name, p] : params) {
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad[k];
      const double m = opt.beta1 * p.first_moment[k] + (1 - opt.beta1) * g;
      const double v = opt.beta2 * p.second_moment[k] + (1 - opt.beta2) * g * g;
      p.first_moment[k] = static_cast<Scalar>(m);
      p.second_moment[k] = static_cast<Scalar>(v);
      const double update =
          opt.learning_rate * (m / c1) / (std::sqrt(v / c2) + opt.epsilon);
      p.value[k] = static_cast<Scalar>(p.value[k] - update);
    }
  }
  params.set_step(t);
  params.ZeroGrad();
}

void TrainConfig::Validate() const {
  thresholds.Validate();
  weights.Validate();
  optimizer.Validate();
  if (batch_size == 0) throw ConfigError("batch size must be positive");
}

MiningDescriptors ComputeMiningDescriptors(Model& model,
                                           const TokenDataset& dataset) {
  const std::size_t dim = model.config().vlaq.out_dim;
  MiningDescriptors out{DenseMatrix(dataset.ground.size(), dim),
                        DenseMatrix(dataset.aerial.size(), dim)};
  for (std::size_t i = 0; i < dataset.ground.size(); ++i) {
    const Descriptor d = model.GroundDescriptor(dataset.ground[i]);
    std::copy(d.values.begin(), d.values.end(), out.ground.row(i).begin());
  }
  for (std::size_t j = 0; j < dataset.aerial.size(); ++j) {
    const Descriptor d = model.AerialDescriptor(dataset.aerial[j]);
    std::copy(d.values.begin(), d.values.end(), out.aerial.row(j).begin());
  }
  return out;
}

BatchLoss ComputeBatchLoss(Graph& g, Model& model, const TokenDataset& dataset,
                           std::span<const Triplet> triplets,
                           const TrainConfig& config) {
  if (triplets.empty()) throw ContractError("empty triplet batch");
  std::vector<const GroundObservation*> queries;
  std::vector<const AerialReference*> aerials;
  std::vector<std::size_t> aerial_index;
  std::vector<DistanceTriplet> local;
  auto slot = [&](std::size_t j) {
    auto it = std::find(aerial_index.begin(), aerial_index.end(), j);
    if (it != aerial_index.end()) return std::size_t(it - aerial_index.begin());
    aerial_index.push_back(j);
    aerials.push_back(&dataset.aerial[j]);
    return aerial_index.size() - 1;
  };
  for (const Triplet& t : triplets) {
    queries.push_back(&dataset.ground[t.query]);
    local.push_back({queries.size() - 1, slot(t.positive), slot(t.negative)});
  }

  BatchLoss out;
  GroundForward ground = model.Ground(g, queries);
  Var aerial = model.Aerial(g, aerials);
  out.triplet = TripletLoss(PairwiseDistances(ground.descriptors, aerial), local,
                            config.weights.margin);

  if (config.weights.lambda_aux > 0) {
    DenseMatrix geo(queries.size(), aerials.size());
    for (std::size_t i = 0; i < queries.size(); ++i) {
      for (std::size_t j = 0; j < aerials.size(); ++j) {
        geo(i, j) = static_cast<Scalar>(
            GeoDistance(queries[i]->geo(), aerials[j]->geo()));
      }
    }
    const Var domains[] = {
        ground.descriptors,
        model.SingleModality(g, queries, ModalityMask::kImageOnly),
        model.SingleModality(g, queries, ModalityMask::kLidarOnly)};
    AuxLoss a = AuxConsistencyLoss(domains, aerial, geo, config.thresholds,
                                   config.weights.margin);
    out.aux = a.value;
    out.aux_terms = a.terms;
  } else {
    out.aux = g.Constant(DenseMatrix(1, 1));
  }
  out.shift = ground.shifts.empty() ? g.Constant(DenseMatrix(1, 1))
                                    : QueryShiftRegularizer(ground.shifts);
  out.total = TotalLoss({out.triplet, out.aux, out.shift}, config.weights);
  return out;
}

EpochMetrics TrainEpoch(Model& model, const TokenDataset& dataset,
                        const TrainConfig& config, std::size_t epoch) {
  config.Validate();
  const auto start = std::chrono::steady_clock::now();

  MiningDescriptors descriptors;
  MiningStrategy strategy = MiningStrategy::kRandom;
  if (epoch > 0) {
    descriptors = ComputeMiningDescriptors(model, dataset);
    strategy = MiningStrategy::kHardestNegative;
  }
  const TripletBatch batches =
      SampleTriplets(dataset, &descriptors, config.thresholds, strategy,
                     config.batch_size, config.seed + epoch);
  if (batches.triplets.empty()) {
    throw ContractError("train split has no query with a positive and a negative");
  }

  EpochMetrics m;
  m.epoch = epoch;
  m.orphans = batches.orphans;
  for (std::size_t k = 0; k < batches.num_batches(); ++k) {
    Graph g;
    const BatchLoss b = ComputeBatchLoss(g, model, dataset, batches.batch(k), config);
    g.Backward(b.total);
    AdamStep(model.params(), config.optimizer);
    m.l_tri += b.triplet.value()[0];
    m.l_aux += b.aux.value()[0];
    m.l_q += b.shift.value()[0];
    m.total += b.total.value()[0];
    m.empty_aux_batches +=
        config.weights.lambda_aux > 0 && b.aux_terms == 0 ? 1 : 0;
    ++m.steps;
  }
  const double n = static_cast<double>(m.steps);
  m.l_tri /= n;
  m.l_aux /= n;
  m.l_q /= n;
  m.total /= n;
  m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                  .count();
  return m;
}

}  // namespace MAGVLAQ_ABI
}  // namespace magvlaq
