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


// Op-by-op gradient checks against central differences, in double precision.
#include <functional>
#include <vector>

#include <gtest/gtest.h>

#include "magvlaq/numerics/autodiff.h"
#include "magvlaq/numerics/grad_check.h"
#include "magvlaq/numerics/mlp.h"
#include "magvlaq/vlaq/vlaq.h"
#include "test_util.h"

namespace magvlaq {
namespace {

static_assert(sizeof(Scalar) == 8, "gradient checks run in double precision");

using testing::Random;
using Op = std::function<Var(const std::vector<Var>&)>;

// Projects the op output onto a fixed random direction so every output entry
// contributes to the checked gradient.
Accum Loss(const Op& op, const std::vector<DenseMatrix>& inputs, std::uint64_t seed,
           Graph& g, std::vector<Var>* vars) {
  std::vector<Var> xs;
  for (const DenseMatrix& m : inputs) xs.push_back(g.Input(m));
  Var out = op(xs);
  Var w = g.Constant(Random(out.rows(), out.cols(), seed, 1.0, "direction"));
  Var loss = Sum(Hadamard(out, w));
  if (vars) {
    *vars = xs;
    g.Backward(loss);
  }
  return loss.value()[0];
}

void CheckOp(const std::string& name, const Op& op, std::vector<DenseMatrix> inputs,
             std::uint64_t seed = 11) {
  Graph g;
  std::vector<Var> vars;
  Loss(op, inputs, seed, g, &vars);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const DenseMatrix analytic = g.grad(vars[k]);
    auto f = [&](const DenseMatrix& x) {
      std::vector<DenseMatrix> moved = inputs;
      moved[k] = x;
      Graph h(Graph::Mode::kInference);
      return Loss(op, moved, seed, h, nullptr);
    };
    const DenseMatrix numeric = FiniteDifferenceGrad(f, inputs[k], 1e-5);
    const GradCheckResult r = CompareGradients(analytic, numeric, 1e-6, 1e-8);
    EXPECT_TRUE(r.ok()) << name << " input " << k << ": " << r.failures
                        << " failures, worst rel " << r.max_rel_error << " at "
                        << r.worst_index;
  }
}

// Values bounded away from zero, for ops with a kink there.
DenseMatrix AwayFromZero(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  DenseMatrix m = Random(rows, cols, seed);
  for (Scalar& v : m.data()) v += v >= 0 ? 0.1 : -0.1;
  return m;
}

TEST(OpGradientTest, LinearAlgebra) {
  CheckOp("matmul", [](auto& x) { return Matmul(x[0], x[1]); },
          {Random(3, 4, 1), Random(4, 2, 2)});
  CheckOp("transpose", [](auto& x) { return Transpose(x[0]); }, {Random(3, 5, 3)});
  CheckOp("add", [](auto& x) { return Add(x[0], x[1]); }, {Random(2, 3, 4), Random(2, 3, 5)});
  CheckOp("sub", [](auto& x) { return Sub(x[0], x[1]); }, {Random(2, 3, 6), Random(2, 3, 7)});
  CheckOp("hadamard", [](auto& x) { return Hadamard(x[0], x[1]); },
          {Random(3, 3, 8), Random(3, 3, 9)});
  CheckOp("scale", [](auto& x) { return Scale(x[0], -2.5); }, {Random(2, 2, 10)});
  CheckOp("add_scalar", [](auto& x) { return AddScalar(x[0], 0.7); }, {Random(2, 2, 11)});
  CheckOp("row_broadcast", [](auto& x) { return AddRowBroadcast(x[0], x[1]); },
          {Random(4, 3, 12), Random(1, 3, 13)});
  CheckOp("scale_rows", [](auto& x) { return ScaleRows(x[0], x[1]); },
          {Random(4, 3, 14), Random(1, 4, 15)});
  CheckOp("column_sums", [](auto& x) { return ColumnSums(x[0]); }, {Random(5, 3, 16)});
  CheckOp("mean_rows", [](auto& x) { return MeanRows(x[0]); }, {Random(5, 3, 17)});
  CheckOp("concat", [](auto& x) { return ConcatRows(std::vector<Var>{x[0], x[1]}); },
          {Random(2, 3, 18), Random(4, 3, 19)});
  CheckOp("reshape", [](auto& x) { return Reshape(x[0], 2, 6); }, {Random(3, 4, 20)});
}

TEST(OpGradientTest, Reductions) {
  CheckOp("sum", [](auto& x) { return Sum(x[0]); }, {Random(3, 2, 21)});
  CheckOp("mean", [](auto& x) { return Mean(x[0]); }, {Random(3, 2, 22)});
  CheckOp("sum_squares", [](auto& x) { return SumSquares(x[0]); }, {Random(3, 2, 23)});
  const std::pair<std::size_t, std::size_t> at[] = {{0, 1}, {2, 0}, {0, 1}};
  CheckOp("gather", [&](auto& x) { return Gather(x[0], at); }, {Random(3, 2, 24)});
}

TEST(OpGradientTest, Nonlinearities) {
  CheckOp("tanh", [](auto& x) { return Tanh(x[0]); }, {Random(3, 4, 25)});
  CheckOp("relu", [](auto& x) { return Relu(x[0]); }, {AwayFromZero(3, 4, 26)});
  CheckOp("softmax", [](auto& x) { return SoftmaxColumns(x[0]); }, {Random(5, 3, 27, 2.0)});
  CheckOp("layer_norm", [](auto& x) { return LayerNorm(x[0], x[1], x[2]); },
          {Random(4, 6, 28), Random(1, 6, 29), Random(1, 6, 30)});
  CheckOp("l2_rows", [](auto& x) { return L2NormalizeRows(x[0]); }, {Random(3, 5, 31)});
  CheckOp("pairwise", [](auto& x) { return PairwiseDistances(x[0], x[1]); },
          {Random(3, 4, 32), Random(5, 4, 33)});
}

TEST(OpGradientTest, Mlp) {
  ParamStore store;
  const std::size_t dims[] = {4, 6, 3};
  InitMlp(store, "m", dims, 5);
  auto loss = [&] {
    Graph g(Graph::Mode::kInference);
    Var x = g.Constant(Random(5, 4, 34));
    Var y = MlpForward(x, BindMlp(g, store, "m"), Activation::kTanh);
    return Accum(Sum(Hadamard(y, g.Constant(Random(5, 3, 35)))).value()[0]);
  };
  Graph g;
  Var y = MlpForward(g.Constant(Random(5, 4, 34)), BindMlp(g, store, "m"));
  g.Backward(Sum(Hadamard(y, g.Constant(Random(5, 3, 35)))));
  for (const std::string& name : store.names()) {
    const GradCheckResult r = CompareGradients(
        store.at(name).grad, FiniteDifferenceGrad(store, name, loss, 1e-5), 1e-6, 1e-8);
    EXPECT_TRUE(r.ok()) << name << " worst rel " << r.max_rel_error;
  }
}

TEST(OpGradientTest, VlaqOps) {
  CheckOp("assignment", [](auto& x) { return AssignmentWeights(x[0], x[1]); },
          {Random(6, 4, 36), Random(3, 4, 37)});
  CheckOp("residual", [](auto& x) { return ResidualAggregate(x[0], x[1], x[2]); },
          {Random(6, 4, 38), Random(3, 4, 39), Random(6, 3, 40)});
  CheckOp("features", [](auto& x) { return VlaqFeatures(x[0], x[1]); },
          {Random(6, 4, 41), Random(3, 4, 42)});
  CheckOp("project", [](auto& x) { return ProjectAndNormalize(x[0], x[1]); },
          {Random(2, 12, 43), Random(12, 5, 44)});
}

}  // namespace
}  // namespace magvlaq
