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
#include <span>
#include <string>
#include <vector>

#include "magvlaq/conditioning/model.h"
#include "magvlaq/numerics/autodiff.h"
#include "magvlaq/tokens/token_set.h"

namespace magvlaq {
inline namespace MAGVLAQ_ABI {

struct MiningThresholds {
  double tau_p = 10.0;  // meters, strict upper bound for positives
  double tau_n = 25.0;  // meters, strict lower bound for negatives
  /// Throws ConfigError unless 0 < tau_p < tau_n.
  void Validate() const;
};

/// Geo partition of the references around one query. Aerials in
/// [tau_p, tau_n] belong to neither set. Both lists keep dataset order.
struct MinedPairs {
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
};

MinedPairs MinePairs(GeoPoint query, std::span<const AerialReference> aerials,
                     const MiningThresholds& th);

enum class MiningStrategy { kRandom, kHardestNegative };

/// Indices into TokenDataset::ground and TokenDataset::aerial.
struct Triplet {
  std::size_t query = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;
  friend bool operator==(const Triplet&, const Triplet&) = default;
};

/// One triplet per train query, in shuffled order; consecutive runs of
/// `batch_size` triplets form the optimizer batches.
struct TripletBatch {
  std::vector<Triplet> triplets;
  std::size_t batch_size = 16;
  std::size_t orphans = 0;  // train queries skipped for lack of pos/neg

  std::size_t num_batches() const {
    return (triplets.size() + batch_size - 1) / batch_size;
  }
  std::span<const Triplet> batch(std::size_t k) const;
};

/// Descriptors used for hardest-negative selection, rows aligned with the
/// dataset's ground and aerial lists.
struct MiningDescriptors {
  DenseMatrix ground;
  DenseMatrix aerial;
};

/// Positives are drawn uniformly. kHardestNegative picks the negative whose
/// descriptor is nearest to the query's (ties to the lower index) and needs
/// `descriptors`; kRandom draws uniformly. Deterministic given `seed`.
TripletBatch SampleTriplets(const TokenDataset& dataset,
                            const MiningDescriptors* descriptors,
                            const MiningThresholds& th, MiningStrategy strategy,
                            std::size_t batch_size, std::uint64_t seed);

struct LossWeights {
  double lambda_tri = 1.0;
  double lambda_aux = 1.0;
  double lambda_q = 1e-3;
  double margin = 0.1;
  void Validate() const;
};

/// Triplet in local coordinates of a distance matrix: row = query,
/// columns = positive and negative reference.
struct DistanceTriplet {
  std::size_t row = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;
};

/// Mean over triplets of [m + D(i,j+) − D(i,j−)]_+. ContractError when empty.
Var TripletLoss(Var distances, std::span<const DistanceTriplet> triplets,
                double margin);

struct AuxLoss {
  Var value;              // 1×1
  std::size_t terms = 0;  // contributing (domain, query, aerial) pairs
};

/// Multi-domain distance consistency. For every ground-descriptor domain
/// (B×out each) and every (query, aerial) pair: geo-close pairs add
/// [D − m]_+, geo-far pairs add [2m − D]_+. Mean over contributing terms;
/// a constant 0 when no pair qualifies. `geo_distance` is B×A.
AuxLoss AuxConsistencyLoss(std::span<const Var> ground_domains, Var aerial,
                           const DenseMatrix& geo_distance,
                           const MiningThresholds& th, double margin);

/// (1/B) Σ ‖ΔC_i‖_F². ContractError for an empty list.
Var QueryShiftRegularizer(std::span<const Var> shifts);

struct LossParts {
  Var triplet;
  Var aux;
  Var shift;
};

/// λ-weighted sum. DivergenceError naming the first non-finite part.
Var TotalLoss(const LossParts& parts, const LossWeights& weights);

struct OptimizerState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  void Validate() const;
};

/// Bias-corrected Adam over every parameter, then zeroes the gradients.
/// A non-finite gradient throws DivergenceError before anything changes.
void AdamStep(ParamStore& params, const OptimizerState& opt);

struct TrainConfig {
  MiningThresholds thresholds;
  LossWeights weights;
  OptimizerState optimizer;
  std::size_t batch_size = 16;
  std::uint64_t seed = 7;
  void Validate() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double l_tri = 0;
  double l_aux = 0;
  double l_q = 0;
  double total = 0;
  double seconds = 0;
  std::size_t steps = 0;
  std::size_t orphans = 0;
  std::size_t empty_aux_batches = 0;
};

/// The loss graph of one optimizer batch: ground descriptors for the batch
/// queries, aerial descriptors for the mined references in order of first
/// appearance, and the three weighted terms.
struct BatchLoss {
  Var triplet;
  Var aux;
  Var shift;
  Var total;
  std::size_t aux_terms = 0;
};

BatchLoss ComputeBatchLoss(Graph& g, Model& model, const TokenDataset& dataset,
                           std::span<const Triplet> triplets,
                           const TrainConfig& config);

/// Descriptors of every ground observation and aerial reference.
MiningDescriptors ComputeMiningDescriptors(Model& model,
                                           const TokenDataset& dataset);

/// One pass over the train split. Epoch 0 mines random negatives, later
/// epochs the hardest negatives under the current model. Loss terms are
/// averaged over batches. DivergenceError leaves the parameters as they were
/// after the last completed step.
EpochMetrics TrainEpoch(Model& model, const TokenDataset& dataset,
                        const TrainConfig& config, std::size_t epoch);

}  // namespace MAGVLAQ_ABI
}  // namespace magvlaq
