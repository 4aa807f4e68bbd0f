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


#include "magvlaq/vlaq/vlaq.h"

#include <cmath>

#include "magvlaq/errors.h"
#include "magvlaq/numerics/random.h"

namespace magvlaq {
inline namespace MAGVLAQ_ABI {

void InitVlaq(ParamStore& store, const VlaqConfig& config, std::uint64_t seed) {
  if (config.num_queries == 0 || config.token_dim == 0 || config.out_dim == 0) {
    throw ConfigError("vlaq dimensions must be positive");
  }
  const double d = static_cast<double>(config.token_dim);
  Rng proto_rng = NamedRng(seed, kPrototypesParam);
  store.Add(kPrototypesParam, RandomNormal(config.num_queries, config.token_dim,
                                           1.0 / std::sqrt(d), proto_rng));
  const std::size_t flat = config.num_queries * config.token_dim;
  Rng proj_rng = NamedRng(seed, kProjectionParam);
  store.Add(kProjectionParam,
            RandomNormal(flat, config.out_dim,
                         1.0 / std::sqrt(static_cast<double>(flat)), proj_rng));
}

Var AssignmentWeights(Var tokens, Var prototypes) {
  if (tokens.cols() != prototypes.cols()) {
    throw DimensionError("assignment_weights: tokens " +
                         tokens.value().ShapeString() + " vs prototypes " +
                         prototypes.value().ShapeString());
  }
  const Scalar inv_sqrt_d =
      Scalar(1) / std::sqrt(static_cast<Scalar>(tokens.cols()));
  Var logits = Scale(Matmul(tokens, Transpose(prototypes)), inv_sqrt_d);
  return SoftmaxColumns(logits);
}

Var ResidualAggregate(Var tokens, Var prototypes, Var alpha) {
  if (tokens.cols() != prototypes.cols() || alpha.rows() != tokens.rows() ||
      alpha.cols() != prototypes.rows()) {
    throw DimensionError("residual_aggregate: tokens " +
                         tokens.value().ShapeString() + ", prototypes " +
                         prototypes.value().ShapeString() + ", alpha " +
                         alpha.value().ShapeString());
  }
  Var weighted_tokens = Matmul(Transpose(alpha), tokens);
  Var weighted_protos = ScaleRows(prototypes, ColumnSums(alpha));
  return Sub(weighted_tokens, weighted_protos);
}

Var VlaqFeatures(Var tokens, Var prototypes) {
  Var alpha = AssignmentWeights(tokens, prototypes);
  Var residuals = ResidualAggregate(tokens, prototypes, alpha);
  Var normalized = L2NormalizeRows(residuals, /*zero_passthrough=*/true);
  return Reshape(normalized, 1, normalized.value().size());
}

Var ProjectAndNormalize(Var features, Var projection) {
  if (features.cols() != projection.rows()) {
    throw DimensionError("vlaq projection: features " +
                         features.value().ShapeString() + " vs projection " +
                         projection.value().ShapeString());
  }
  return L2NormalizeRows(Matmul(features, projection));
}

DenseMatrix AssignmentWeights(const DenseMatrix& tokens,
                              const DenseMatrix& prototypes) {
  Graph g(Graph::Mode::kInference);
  return AssignmentWeights(g.ConstantRef(tokens), g.ConstantRef(prototypes))
      .value();
}

DenseMatrix ResidualAggregate(const DenseMatrix& tokens,
                              const DenseMatrix& prototypes,
                              const DenseMatrix& alpha) {
  Graph g(Graph::Mode::kInference);
  return ResidualAggregate(g.ConstantRef(tokens), g.ConstantRef(prototypes),
                           g.ConstantRef(alpha))
      .value();
}

Descriptor VlaqDescriptor(const DenseMatrix& tokens,
                          const QueryPrototypes& prototypes,
                          const VlaqHead& head, Branch branch) {
  Graph g(Graph::Mode::kInference);
  Var features =
      VlaqFeatures(g.ConstantRef(tokens), g.ConstantRef(prototypes.matrix));
  Var z = ProjectAndNormalize(features, g.ConstantRef(head.projection));
  auto values = z.value().data();
  return {std::vector<Scalar>(values.begin(), values.end()), branch};
}

Descriptor BruteForceVlaq(const DenseMatrix& tokens,
                          const QueryPrototypes& prototypes,
                          const VlaqHead& head, Branch branch) {
  const std::size_t n = tokens.rows();
  const std::size_t d = tokens.cols();
  const std::size_t s_count = prototypes.matrix.rows();
  if (prototypes.matrix.cols() != d) {
    throw DimensionError("brute_force_vlaq: token width " + std::to_string(d) +
                         " vs prototype width " +
                         std::to_string(prototypes.matrix.cols()));
  }
  if (head.projection.rows() != s_count * d) {
    throw DimensionError("brute_force_vlaq: projection has " +
                         std::to_string(head.projection.rows()) + " rows");
  }
  const std::size_t out_dim = head.projection.cols();
  std::vector<double> flat(s_count * d, 0.0);
  for (std::size_t s = 0; s < s_count; ++s) {
    std::vector<double> expo(n);
    double denom = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0;
      for (std::size_t k = 0; k < d; ++k) {
        dot += double(tokens(i, k)) * double(prototypes.matrix(s, k));
      }
      expo[i] = std::exp(dot / std::sqrt(double(d)));
      denom += expo[i];
    }
    std::vector<double> v(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double a = expo[i] / denom;
      for (std::size_t k = 0; k < d; ++k) {
        v[k] += a * (double(tokens(i, k)) - double(prototypes.matrix(s, k)));
      }
    }
    double norm = 0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (std::size_t k = 0; k < d; ++k) {
      flat[s * d + k] = norm > 1e-12 ? v[k] / norm : v[k];
    }
  }
  std::vector<double> z(out_dim, 0.0);
  for (std::size_t j = 0; j < out_dim; ++j) {
    for (std::size_t i = 0; i < flat.size(); ++i) {
      z[j] += flat[i] * double(head.projection(i, j));
    }
  }
  double norm = 0;
  for (double x : z) norm += x * x;
  norm = std::sqrt(norm);
  if (norm <= 1e-12) {
    throw DegenerateInputError("brute_force_vlaq: projected descriptor is zero");
  }
  Descriptor out;
  out.branch = branch;
  for (double x : z) out.values.push_back(static_cast<Scalar>(x / norm));
  return out;
}

}  // namespace MAGVLAQ_ABI
}  // namespace magvlaq
