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


#include <cmath>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "magvlaq/errors.h"
#include "magvlaq/numerics/autodiff.h"
#include "magvlaq/numerics/grad_check.h"
#include "magvlaq/numerics/mlp.h"
#include "magvlaq/numerics/param_store.h"
#include "test_util.h"

namespace magvlaq {
namespace {

using testing::Random;
using EigenMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

EigenMat ToEigen(const DenseMatrix& m) {
  return Eigen::Map<const EigenMat>(m.data().data(), m.rows(), m.cols());
}

void ExpectNear(const DenseMatrix& got, const EigenMat& want, double tol) {
  ASSERT_EQ(got.rows(), static_cast<std::size_t>(want.rows()));
  ASSERT_EQ(got.cols(), static_cast<std::size_t>(want.cols()));
  for (std::size_t r = 0; r < got.rows(); ++r) {
    for (std::size_t c = 0; c < got.cols(); ++c) {
      EXPECT_NEAR(got(r, c), want(r, c), tol) << r << "," << c;
    }
  }
}

TEST(DenseMatrixTest, MatmulMatchesEigen) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t m = 1 + seed % 7, k = 1 + (seed * 3) % 11, n = 1 + (seed * 5) % 9;
    const DenseMatrix a = Random(m, k, seed, 1.0, "a");
    const DenseMatrix b = Random(k, n, seed, 1.0, "b");
    ExpectNear(Matmul(a, b), ToEigen(a) * ToEigen(b), 1e-5);
    ExpectNear(Transpose(a), ToEigen(a).transpose(), 0);
  }
}

TEST(DenseMatrixTest, TransposedAccumulatorsMatchEigen) {
  const DenseMatrix a = Random(5, 4, 1, 1.0, "a");
  const DenseMatrix b = Random(5, 3, 1, 1.0, "b");
  const DenseMatrix c = Random(6, 4, 1, 1.0, "c");
  DenseMatrix ta(4, 3, Scalar{1});
  MatmulTransposeAAccumulate(a, b, ta);
  ExpectNear(ta, ToEigen(a).transpose() * ToEigen(b) + EigenMat::Ones(4, 3), 1e-5);
  DenseMatrix tb(5, 6);
  MatmulTransposeBAccumulate(a, c, tb);
  ExpectNear(tb, ToEigen(a) * ToEigen(c).transpose(), 1e-5);
}

TEST(DenseMatrixTest, ShapeErrorsNameShapes) {
  const DenseMatrix a(2, 3), b(2, 3);
  try {
    Matmul(a, b);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("2x3"), std::string::npos);
  }
  EXPECT_THROW(DenseMatrix(2, 2, std::vector<Scalar>(3)), DimensionError);
  EXPECT_THROW(a.Reshaped(4, 2), DimensionError);
}

TEST(DenseMatrixTest, FiniteAndNorms) {
  DenseMatrix m = DenseMatrix::FromRows({{3, 4}, {0, 0}});
  EXPECT_TRUE(m.AllFinite());
  EXPECT_DOUBLE_EQ(FrobeniusNormSquared(m), 25.0);
  m(1, 1) = std::numeric_limits<Scalar>::quiet_NaN();
  EXPECT_FALSE(m.AllFinite());
}

TEST(ParamStoreTest, NamesSortedAndDuplicatesRejected) {
  ParamStore store;
  store.Add("b", DenseMatrix(1, 2));
  store.Add("a", DenseMatrix(2, 2));
  EXPECT_THROW(store.Add("a", DenseMatrix(1, 1)), ConfigError);
  EXPECT_EQ(store.names(), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(store.NumScalars(), 6u);
  EXPECT_TRUE(store.at("a").grad.SameShape(store.at("a").value));
  EXPECT_THROW(store.at("missing"), ConfigError);
}

TEST(RandomTest, NamedStreamsAreIndependentAndRepeatable) {
  Rng a1 = NamedRng(7, "alpha"), a2 = NamedRng(7, "alpha");
  Rng b = NamedRng(7, "beta"), c = NamedRng(8, "alpha");
  const auto x = a1();
  EXPECT_EQ(x, a2());
  EXPECT_NE(x, b());
  EXPECT_NE(x, c());
  EXPECT_EQ(Fnv1a(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(Fnv1a("a"), 0xaf63dc4c8601ec8cull);
}

TEST(AutodiffTest, BackwardNeedsScalarLoss) {
  Graph g;
  Var x = g.Input(DenseMatrix(2, 2, Scalar{1}));
  EXPECT_THROW(g.Backward(x), ContractError);
}

TEST(AutodiffTest, ParameterNodesAreSharedAndGradsAccumulate) {
  ParamStore store;
  store.Add("w", DenseMatrix::FromRows({{2, -1}}));
  for (int pass = 0; pass < 2; ++pass) {
    Graph g;
    Var w = g.Parameter(store, "w");
    EXPECT_EQ(w.id(), g.Parameter(store, "w").id());
    g.Backward(SumSquares(w));
  }
  EXPECT_EQ(store.at("w").grad, DenseMatrix::FromRows({{8, -4}}));
  store.ZeroGrad();
  EXPECT_EQ(store.at("w").grad, DenseMatrix(1, 2));
}

TEST(AutodiffTest, InferenceGraphRecordsNothing) {
  ParamStore store;
  store.Add("w", DenseMatrix::FromRows({{1, 2}}));
  Graph g(Graph::Mode::kInference);
  Var w = g.Parameter(store, "w");
  EXPECT_FALSE(g.requires_grad(w));
  EXPECT_FLOAT_EQ(Sum(Tanh(w)).value()[0], std::tanh(1.f) + std::tanh(2.f));
}

TEST(AutodiffTest, SoftmaxColumnsSumToOneForLargeLogits) {
  DenseMatrix logits = Random(9, 4, 3, 50.0);
  logits(0, 0) = 1000;
  const DenseMatrix p = SoftmaxColumns(logits);
  for (std::size_t c = 0; c < p.cols(); ++c) {
    double s = 0;
    for (std::size_t r = 0; r < p.rows(); ++r) s += p(r, c);
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
  EXPECT_NEAR(p(0, 0), 1.0, 1e-6);
  EXPECT_THROW(SoftmaxColumns(DenseMatrix()), DimensionError);
}

TEST(AutodiffTest, NormalizationEdgeCases) {
  EXPECT_THROW(LayerNorm(DenseMatrix(2, 1), DenseMatrix(1, 1, Scalar{1}), DenseMatrix(1, 1)),
               DegenerateInputError);
  Graph g;
  Var zero = g.Input(DenseMatrix(2, 3));
  EXPECT_THROW(L2NormalizeRows(zero), DegenerateInputError);
  EXPECT_EQ(L2NormalizeRows(zero, true).value(), DenseMatrix(2, 3));
  const DenseMatrix unit = L2Normalize(DenseMatrix::FromRows({{3, 4}}));
  EXPECT_FLOAT_EQ(unit[0], 0.6f);
  EXPECT_FLOAT_EQ(unit[1], 0.8f);
}

TEST(MlpTest, ChainMismatchNamesLayer) {
  ParamStore store;
  const std::size_t dims[] = {4, 3, 2};
  InitMlp(store, "net", dims, 1);
  store.at("net.w1").value = DenseMatrix(5, 2);
  Graph g;
  auto layers = BindMlp(g, store, "net");
  try {
    MlpForward(g.Constant(DenseMatrix(1, 4)), layers);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("net.w1"), std::string::npos) << e.what();
  }
}

TEST(MlpTest, ZeroLastLayerOutputsZero) {
  ParamStore store;
  const std::size_t dims[] = {3, 5, 2};
  InitMlp(store, "z", dims, 4, /*zero_last_layer=*/true);
  Graph g(Graph::Mode::kInference);
  Var out = MlpForward(g.Constant(Random(4, 3, 1)), BindMlp(g, store, "z"));
  EXPECT_EQ(out.value(), DenseMatrix(4, 2));
}

TEST(GradCheckTest, StepBoundsAndComparison) {
  auto f = [](const DenseMatrix& x) { return Accum(x[0]) * x[0]; };
  EXPECT_THROW(FiniteDifferenceGrad(f, DenseMatrix(1, 1), 1e-6), ContractError);
  EXPECT_THROW(FiniteDifferenceGrad(f, DenseMatrix(1, 1), 0.1), ContractError);
  const DenseMatrix num = FiniteDifferenceGrad(f, DenseMatrix(1, 1, Scalar{2}), 1e-3);
  EXPECT_NEAR(num[0], 4.0, 1e-2);

  const DenseMatrix a = DenseMatrix::FromRows({{1.0f, 1e-8f, 2.0f}});
  const DenseMatrix n = DenseMatrix::FromRows({{1.0005f, 5e-7f, 2.1f}});
  const GradCheckResult r = CompareGradients(a, n);
  EXPECT_EQ(r.failures, 1u);
  EXPECT_EQ(r.worst_index, 2u);
}

TEST(GradCheckTest, StoreVersionRestoresValue) {
  ParamStore store;
  store.Add("p", DenseMatrix::FromRows({{0.3f, -0.7f}}));
  const DenseMatrix before = store.at("p").value;
  auto loss = [&] {
    Graph g(Graph::Mode::kInference);
    return Accum(SumSquares(g.Parameter(store, "p")).value()[0]);
  };
  const DenseMatrix num = FiniteDifferenceGrad(store, "p", loss, 1e-3);
  EXPECT_EQ(store.at("p").value, before);
  EXPECT_NEAR(num[0], 0.6, 1e-3);
  EXPECT_NEAR(num[1], -1.4, 1e-3);
}

}  // namespace
}  // namespace magvlaq
