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

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "magvlaq/numerics/matrix.h"
#include "magvlaq/numerics/param_store.h"

namespace magvlaq {
inline namespace MAGVLAQ_ABI {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;

  bool valid() const { return graph_ != nullptr; }
  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }

  const DenseMatrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Dynamic reverse-mode tape. A graph is built by applying ops to Vars and
/// consumed by Backward(). One graph belongs to one thread.
///
/// In inference mode no backward closures are stored and nothing requires a
/// gradient, so the same forward code runs without tape overhead.
class Graph {
 public:
  enum class Mode { kRecord, kInference };

  explicit Graph(Mode mode = Mode::kRecord) : mode_(mode) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return mode_ == Mode::kRecord; }
  std::size_t size() const { return nodes_.size(); }

  /// Leaf owning its value. Never requires a gradient.
  Var Constant(DenseMatrix value);
  /// Leaf viewing an external matrix that must outlive the graph.
  Var ConstantRef(const DenseMatrix& value);
  /// Leaf bound to a stored parameter. Repeated calls with the same name
  /// return the same node. Backward() adds this node's gradient into the
  /// parameter's accumulator.
  Var Parameter(ParamStore& store, const std::string& name);
  /// Leaf that requires a gradient but is not tied to a ParamStore. Useful
  /// for checking gradients with respect to intermediate inputs.
  Var Input(DenseMatrix value);

  const DenseMatrix& value(Var v) const;
  /// Gradient of the last Backward() with respect to `v`; a zero matrix of
  /// the right shape if no gradient reached it.
  DenseMatrix grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }

  /// Reverse sweep from a 1×1 loss. Node gradients are recomputed from
  /// scratch; parameter accumulators are added to, not overwritten.
  void Backward(Var loss);

  // Op-author interface.
  using BackwardFn = std::function<void(Graph&, std::size_t)>;
  Var Emit(DenseMatrix value, std::initializer_list<Var> parents,
           BackwardFn backward);
  Var Emit(DenseMatrix value, std::span<const Var> parents,
           BackwardFn backward);
  /// Upstream gradient of node `id` during its backward call.
  const DenseMatrix& upstream(std::size_t id) const { return nodes_[id].grad; }
  /// Gradient buffer of `id`, zero-allocated on first touch. Returns nullptr
  /// when the node does not require a gradient.
  DenseMatrix* grad_sink(std::size_t id);
  const DenseMatrix& value_at(std::size_t id) const;

 private:
  struct Node {
    DenseMatrix owned;
    const DenseMatrix* external = nullptr;
    DenseMatrix grad;
    bool grad_ready = false;
    bool requires_grad = false;
    BackwardFn backward;
    magvlaq::Parameter* param = nullptr;
  };

  Var Push(Node node);
  void CheckOwned(Var v) const;

  Mode mode_;
  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::size_t> param_ids_;
};

// Differentiable ops. Every op checks shapes and throws DimensionError
// naming the offending shapes.

Var Matmul(Var a, Var b);
Var Transpose(Var a);
Var Add(Var a, Var b);
Var Sub(Var a, Var b);
Var Hadamard(Var a, Var b);
Var Scale(Var a, Scalar factor);
Var AddScalar(Var a, Scalar offset);
/// x (R×C) + row (1×C) broadcast over rows.
Var AddRowBroadcast(Var x, Var row);
/// Multiplies row r of x (R×C) by weights[r]; weights is 1×R.
Var ScaleRows(Var x, Var weights);
Var ColumnSums(Var x);
Var MeanRows(Var x);
Var Tanh(Var x);
/// max(x, 0) with subgradient 0 at the kink.
Var Relu(Var x);
/// Softmax over the row axis of each column (max-subtracted, double
/// accumulation). Empty input throws DimensionError.
Var SoftmaxColumns(Var logits);
/// Per-row layer normalization with learned affine gain/bias (1×C each).
Var LayerNorm(Var x, Var gain, Var bias, Scalar epsilon = Scalar(1e-5));
/// Normalizes each row to unit L2 norm. A row with norm <= 1e-12 throws
/// DegenerateInputError, unless `zero_passthrough` is set, in which case it
/// is emitted as-is with an identity-free zero gradient.
Var L2NormalizeRows(Var x, bool zero_passthrough = false);
Var ConcatRows(std::span<const Var> parts);
Var Reshape(Var x, std::size_t rows, std::size_t cols);
Var Sum(Var x);
Var Mean(Var x);
Var SumSquares(Var x);
/// Picks entries (r, c) of x into a K×1 column.
Var Gather(Var x, std::span<const std::pair<std::size_t, std::size_t>> at);
/// Euclidean distances between every row of a and every row of b.
/// Subgradient 0 where the distance is exactly 0.
Var PairwiseDistances(Var a, Var b);

// Value-level conveniences, evaluated on a throwaway inference graph.
DenseMatrix SoftmaxColumns(const DenseMatrix& logits);
DenseMatrix LayerNorm(const DenseMatrix& x, const DenseMatrix& gain,
                      const DenseMatrix& bias, Scalar epsilon = Scalar(1e-5));
/// Unit-L2 copy of a vector (any shape, treated as flat).
DenseMatrix L2Normalize(const DenseMatrix& v);

}  // namespace MAGVLAQ_ABI
}  // namespace magvlaq
