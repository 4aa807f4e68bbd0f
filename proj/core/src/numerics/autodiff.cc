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


#include "magvlaq/numerics/autodiff.h"

#include <algorithm>
#include <cmath>

#include "magvlaq/errors.h"

namespace magvlaq {
inline namespace MAGVLAQ_ABI {

const DenseMatrix& Var::value() const { return graph_->value(*this); }

// ---------------------------------------------------------------------------
// Graph

Var Graph::Push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Graph::CheckOwned(Var v) const {
  if (!v.valid() || &v.graph() != this || v.id() >= nodes_.size()) {
    throw ContractError("variable does not belong to this graph");
  }
}

Var Graph::Constant(DenseMatrix value) {
  Node node;
  node.owned = std::move(value);
  return Push(std::move(node));
}

Var Graph::ConstantRef(const DenseMatrix& value) {
  Node node;
  node.external = &value;
  return Push(std::move(node));
}

Var Graph::Parameter(ParamStore& store, const std::string& name) {
  auto it = param_ids_.find(name);
  if (it != param_ids_.end()) return Var(this, it->second);
  magvlaq::Parameter& p = store.at(name);
  Node node;
  node.external = &p.value;
  node.requires_grad = recording();
  node.param = &p;
  Var v = Push(std::move(node));
  param_ids_.emplace(name, v.id());
  return v;
}

Var Graph::Input(DenseMatrix value) {
  Node node;
  node.owned = std::move(value);
  node.requires_grad = recording();
  return Push(std::move(node));
}

const DenseMatrix& Graph::value(Var v) const {
  CheckOwned(v);
  return value_at(v.id());
}

const DenseMatrix& Graph::value_at(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.external != nullptr ? *n.external : n.owned;
}

DenseMatrix Graph::grad(Var v) const {
  CheckOwned(v);
  const Node& n = nodes_[v.id()];
  if (n.grad_ready) return n.grad;
  const DenseMatrix& val = value_at(v.id());
  return DenseMatrix(val.rows(), val.cols());
}

DenseMatrix* Graph::grad_sink(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  if (!n.grad_ready) {
    const DenseMatrix& val = value_at(id);
    n.grad = DenseMatrix(val.rows(), val.cols());
    n.grad_ready = true;
  }
  return &n.grad;
}

Var Graph::Emit(DenseMatrix value, std::initializer_list<Var> parents,
                BackwardFn backward) {
  return Emit(std::move(value),
              std::span<const Var>(parents.begin(), parents.size()),
              std::move(backward));
}

Var Graph::Emit(DenseMatrix value, std::span<const Var> parents,
                BackwardFn backward) {
  Node node;
  node.owned = std::move(value);
  if (recording()) {
    for (Var p : parents) {
      CheckOwned(p);
      if (nodes_[p.id()].requires_grad) {
        node.requires_grad = true;
        break;
      }
    }
    if (node.requires_grad) node.backward = std::move(backward);
  }
  return Push(std::move(node));
}

void Graph::Backward(Var loss) {
  CheckOwned(loss);
  const DenseMatrix& lv = value_at(loss.id());
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ContractError("backward needs a scalar (1x1) loss, got " +
                        lv.ShapeString());
  }
  for (Node& n : nodes_) {
    n.grad_ready = false;
    n.grad = DenseMatrix();
  }
  if (!nodes_[loss.id()].requires_grad) return;
  DenseMatrix* seed = grad_sink(loss.id());
  (*seed)(0, 0) = Scalar{1};

  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.grad_ready) continue;
    if (n.backward) n.backward(*this, id);
  }
  for (Node& n : nodes_) {
    if (n.param != nullptr && n.grad_ready) AddScaled(n.grad, 1, n.param->grad);
  }
}

// ---------------------------------------------------------------------------
// Ops

namespace {

void RequireSameGraph(Var a, Var b) {
  if (!a.valid() || !b.valid() || &a.graph() != &b.graph()) {
    throw ContractError("operands belong to different graphs");
  }
}

void RequireSameShape(const char* op, const DenseMatrix& a,
                      const DenseMatrix& b) {
  if (!a.SameShape(b)) {
    throw DimensionError(std::string(op) + ": shapes " + a.ShapeString() +
                         " and " + b.ShapeString() + " differ");
  }
}

}  // namespace

Var Matmul(Var a, Var b) {
  RequireSameGraph(a, b);
  Graph& g = a.graph();
  DenseMatrix out = Matmul(a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return g.Emit(std::move(out), {a, b}, [ia, ib](Graph& g, std::size_t self) {
    const DenseMatrix& up = g.upstream(self);
    if (DenseMatrix* da = g.grad_sink(ia)) {
      MatmulTransposeBAccumulate(up, g.value_at(ib), *da);
    }
    if (DenseMatrix* db = g.grad_sink(ib)) {
      MatmulTransposeAAccumulate(g.value_at(ia), up, *db);
    }
  });
}

Var Transpose(Var a) {
  Graph& g = a.graph();
  const std::size_t ia = a.id();
  return g.Emit(Transpose(a.value()), {a}, [ia](Graph& g, std::size_t self) {
    if (DenseMatrix* da = g.grad_sink(ia)) {
      AddScaled(Transpose(g.upstream(self)), 1, *da);
    }
  });
}

Var Add(Var a, Var b) {
  RequireSameGraph(a, b);
  RequireSameShape("add", a.value(), b.value());
  DenseMatrix out = a.value();
  AddScaled(b.value(), 1, out);
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().Emit(std::move(out), {a, b},
                        [ia, ib](Graph& g, std::size_t self) {
                          const DenseMatrix& up = g.upstream(self);
                          if (DenseMatrix* da = g.grad_sink(ia)) {
                            AddScaled(up, 1, *da);
                          }
                          if (DenseMatrix* db = g.grad_sink(ib)) {
                            AddScaled(up, 1, *db);
                          }
                        });
}

Var Sub(Var a, Var b) {
  RequireSameGraph(a, b);
  RequireSameShape("sub", a.value(), b.value());
  DenseMatrix out = a.value();
  AddScaled(b.value(), -1, out);
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().Emit(std::move(out), {a, b},
                        [ia, ib](Graph& g, std::size_t self) {
                          const DenseMatrix& up = g.upstream(self);
                          if (DenseMatrix* da = g.grad_sink(ia)) {
                            AddScaled(up, 1, *da);
                          }
                          if (DenseMatrix* db = g.grad_sink(ib)) {
                            AddScaled(up, -1, *db);
                          }
                        });
}

Var Hadamard(Var a, Var b) {
  RequireSameGraph(a, b);
  RequireSameShape("hadamard", a.value(), b.value());
  DenseMatrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().Emit(
      std::move(out), {a, b}, [ia, ib](Graph& g, std::size_t self) {
        const DenseMatrix& up = g.upstream(self);
        if (DenseMatrix* da = g.grad_sink(ia)) {
          const DenseMatrix& bv = g.value_at(ib);
          for (std::size_t i = 0; i < up.size(); ++i) (*da)[i] += up[i] * bv[i];
        }
        if (DenseMatrix* db = g.grad_sink(ib)) {
          const DenseMatrix& av = g.value_at(ia);
          for (std::size_t i = 0; i < up.size(); ++i) (*db)[i] += up[i] * av[i];
        }
      });
}

Var Scale(Var a, Scalar factor) {
  DenseMatrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= factor;
  const std::size_t ia = a.id();
  return a.graph().Emit(std::move(out), {a},
                        [ia, factor](Graph& g, std::size_t self) {
                          if (DenseMatrix* da = g.grad_sink(ia)) {
                            AddScaled(g.upstream(self), factor, *da);
                          }
                        });
}

Var AddScalar(Var a, Scalar offset) {
  DenseMatrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += offset;
  const std::size_t ia = a.id();
  return a.graph().Emit(std::move(out), {a}, [ia](Graph& g, std::size_t self) {
    if (DenseMatrix* da = g.grad_sink(ia)) AddScaled(g.upstream(self), 1, *da);
  });
}

Var AddRowBroadcast(Var x, Var row) {
  RequireSameGraph(x, row);
  const DenseMatrix& xv = x.value();
  const DenseMatrix& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != xv.cols()) {
    throw DimensionError("add_row_broadcast: row " + rv.ShapeString() +
                         " does not broadcast over " + xv.ShapeString());
  }
  DenseMatrix out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto dst = out.row(r);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += rv[c];
  }
  const std::size_t ix = x.id(), ir = row.id();
  return x.graph().Emit(
      std::move(out), {x, row}, [ix, ir](Graph& g, std::size_t self) {
        const DenseMatrix& up = g.upstream(self);
        if (DenseMatrix* dx = g.grad_sink(ix)) AddScaled(up, 1, *dx);
        if (DenseMatrix* dr = g.grad_sink(ir)) {
          for (std::size_t r = 0; r < up.rows(); ++r) {
            auto src = up.row(r);
            for (std::size_t c = 0; c < src.size(); ++c) (*dr)[c] += src[c];
          }
        }
      });
}

Var ScaleRows(Var x, Var weights) {
  RequireSameGraph(x, weights);
  const DenseMatrix& xv = x.value();
  const DenseMatrix& wv = weights.value();
  if (wv.rows() != 1 || wv.cols() != xv.rows()) {
    throw DimensionError("scale_rows: weights " + wv.ShapeString() +
                         " do not match rows of " + xv.ShapeString());
  }
  DenseMatrix out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (Scalar& v : out.row(r)) v *= wv[r];
  }
  const std::size_t ix = x.id(), iw = weights.id();
  return x.graph().Emit(
      std::move(out), {x, weights}, [ix, iw](Graph& g, std::size_t self) {
        const DenseMatrix& up = g.upstream(self);
        const DenseMatrix& xv = g.value_at(ix);
        const DenseMatrix& wv = g.value_at(iw);
        if (DenseMatrix* dx = g.grad_sink(ix)) {
          for (std::size_t r = 0; r < up.rows(); ++r) {
            auto src = up.row(r);
            auto dst = dx->row(r);
            for (std::size_t c = 0; c < src.size(); ++c) dst[c] += wv[r] * src[c];
          }
        }
        if (DenseMatrix* dw = g.grad_sink(iw)) {
          for (std::size_t r = 0; r < up.rows(); ++r) {
            Accum acc = 0;
            auto u = up.row(r);
            auto xr = xv.row(r);
            for (std::size_t c = 0; c < u.size(); ++c) acc += Accum(u[c]) * xr[c];
            (*dw)[r] += static_cast<Scalar>(acc);
          }
        }
      });
}

Var ColumnSums(Var x) {
  const DenseMatrix& xv = x.value();
  std::vector<Accum> acc(xv.cols(), 0);
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    auto src = xv.row(r);
    for (std::size_t c = 0; c < src.size(); ++c) acc[c] += src[c];
  }
  DenseMatrix out(1, xv.cols());
  for (std::size_t c = 0; c < acc.size(); ++c) out[c] = static_cast<Scalar>(acc[c]);
  const std::size_t ix = x.id();
  return x.graph().Emit(std::move(out), {x}, [ix](Graph& g, std::size_t self) {
    if (DenseMatrix* dx = g.grad_sink(ix)) {
      const DenseMatrix& up = g.upstream(self);
      for (std::size_t r = 0; r < dx->rows(); ++r) {
        auto dst = dx->row(r);
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += up[c];
      }
    }
  });
}

Var MeanRows(Var x) {
  const DenseMatrix& xv = x.value();
  if (xv.rows() == 0) throw DegenerateInputError("mean over zero rows");
  std::vector<Accum> acc(xv.cols(), 0);
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    auto src = xv.row(r);
    for (std::size_t c = 0; c < src.size(); ++c) acc[c] += src[c];
  }
  const Accum n = static_cast<Accum>(xv.rows());
  DenseMatrix out(1, xv.cols());
  for (std::size_t c = 0; c < acc.size(); ++c) {
    out[c] = static_cast<Scalar>(acc[c] / n);
  }
  const std::size_t ix = x.id();
  return x.graph().Emit(std::move(out), {x}, [ix](Graph& g, std::size_t self) {
    if (DenseMatrix* dx = g.grad_sink(ix)) {
      const DenseMatrix& up = g.upstream(self);
      const Scalar inv = Scalar(1) / static_cast<Scalar>(dx->rows());
      for (std::size_t r = 0; r < dx->rows(); ++r) {
        auto dst = dx->row(r);
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += up[c] * inv;
      }
    }
  });
}

Var Tanh(Var x) {
  DenseMatrix out = x.value();
  for (Scalar& v : out.data()) v = std::tanh(v);
  const std::size_t ix = x.id();
  return x.graph().Emit(std::move(out), {x}, [ix](Graph& g, std::size_t self) {
    if (DenseMatrix* dx = g.grad_sink(ix)) {
      const DenseMatrix& up = g.upstream(self);
      const DenseMatrix& y = g.value_at(self);
      for (std::size_t i = 0; i < up.size(); ++i) {
        (*dx)[i] += up[i] * (Scalar(1) - y[i] * y[i]);
      }
    }
  });
}

Var Relu(Var x) {
  DenseMatrix out = x.value();
  for (Scalar& v : out.data()) v = v > Scalar{0} ? v : Scalar{0};
  const std::size_t ix = x.id();
  return x.graph().Emit(std::move(out), {x}, [ix](Graph& g, std::size_t self) {
    if (DenseMatrix* dx = g.grad_sink(ix)) {
      const DenseMatrix& up = g.upstream(self);
      const DenseMatrix& xv = g.value_at(ix);
      for (std::size_t i = 0; i < up.size(); ++i) {
        if (xv[i] > Scalar{0}) (*dx)[i] += up[i];
      }
    }
  });
}

Var SoftmaxColumns(Var logits) {
  const DenseMatrix& e = logits.value();
  if (e.rows() == 0 || e.cols() == 0) {
    throw DimensionError("softmax_columns: empty input " + e.ShapeString());
  }
  const std::size_t n = e.rows(), s = e.cols();
  DenseMatrix out(n, s);
  std::vector<Accum> col(n);
  for (std::size_t c = 0; c < s; ++c) {
    Scalar peak = e(0, c);
    for (std::size_t r = 1; r < n; ++r) peak = std::max(peak, e(r, c));
    Accum denom = 0;
    for (std::size_t r = 0; r < n; ++r) {
      col[r] = std::exp(static_cast<Accum>(e(r, c)) - peak);
      denom += col[r];
    }
    for (std::size_t r = 0; r < n; ++r) {
      out(r, c) = static_cast<Scalar>(col[r] / denom);
    }
  }
  const std::size_t ie = logits.id();
  return logits.graph().Emit(
      std::move(out), {logits}, [ie](Graph& g, std::size_t self) {
        DenseMatrix* de = g.grad_sink(ie);
        if (de == nullptr) return;
        const DenseMatrix& up = g.upstream(self);
        const DenseMatrix& a = g.value_at(self);
        for (std::size_t c = 0; c < a.cols(); ++c) {
          Accum dot = 0;
          for (std::size_t r = 0; r < a.rows(); ++r) {
            dot += Accum(a(r, c)) * up(r, c);
          }
          for (std::size_t r = 0; r < a.rows(); ++r) {
            (*de)(r, c) += static_cast<Scalar>(a(r, c) * (up(r, c) - dot));
          }
        }
      });
}

Var LayerNorm(Var x, Var gain, Var bias, Scalar epsilon) {
  RequireSameGraph(x, gain);
  RequireSameGraph(x, bias);
  const DenseMatrix& xv = x.value();
  const std::size_t n = xv.rows(), d = xv.cols();
  if (d < 2) {
    throw DegenerateInputError("layer_norm needs at least 2 features, got " +
                               xv.ShapeString());
  }
  const DenseMatrix& gv = gain.value();
  const DenseMatrix& bv = bias.value();
  if (gv.rows() != 1 || gv.cols() != d || !bv.SameShape(gv)) {
    throw DimensionError("layer_norm: gain " + gv.ShapeString() + " / bias " +
                         bv.ShapeString() + " do not match " +
                         xv.ShapeString());
  }
  // normalized activations and per-row inverse std are kept for backward
  DenseMatrix normalized(n, d);
  std::vector<Scalar> inv_std(n);
  DenseMatrix out(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = xv.row(r);
    Accum mean = 0;
    for (Scalar v : row) mean += v;
    mean /= static_cast<Accum>(d);
    Accum var = 0;
    for (Scalar v : row) var += (v - mean) * (v - mean);
    var /= static_cast<Accum>(d);
    const Accum istd = 1.0 / std::sqrt(var + epsilon);
    inv_std[r] = static_cast<Scalar>(istd);
    for (std::size_t c = 0; c < d; ++c) {
      const Scalar xhat = static_cast<Scalar>((row[c] - mean) * istd);
      normalized(r, c) = xhat;
      out(r, c) = xhat * gv[c] + bv[c];
    }
  }
  const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  return x.graph().Emit(
      std::move(out), {x, gain, bias},
      [ix, ig, ib, normalized = std::move(normalized),
       inv_std = std::move(inv_std)](Graph& g, std::size_t self) {
        const DenseMatrix& up = g.upstream(self);
        const DenseMatrix& gv = g.value_at(ig);
        const std::size_t n = up.rows(), d = up.cols();
        if (DenseMatrix* dg = g.grad_sink(ig)) {
          for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < d; ++c) {
              (*dg)[c] += up(r, c) * normalized(r, c);
            }
          }
        }
        if (DenseMatrix* db = g.grad_sink(ib)) {
          for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < d; ++c) (*db)[c] += up(r, c);
          }
        }
        if (DenseMatrix* dx = g.grad_sink(ix)) {
          for (std::size_t r = 0; r < n; ++r) {
            Accum mean_dxhat = 0, mean_dxhat_xhat = 0;
            for (std::size_t c = 0; c < d; ++c) {
              const Accum dxhat = Accum(up(r, c)) * gv[c];
              mean_dxhat += dxhat;
              mean_dxhat_xhat += dxhat * normalized(r, c);
            }
            mean_dxhat /= static_cast<Accum>(d);
            mean_dxhat_xhat /= static_cast<Accum>(d);
            for (std::size_t c = 0; c < d; ++c) {
              const Accum dxhat = Accum(up(r, c)) * gv[c];
              (*dx)(r, c) += static_cast<Scalar>(
                  inv_std[r] *
                  (dxhat - mean_dxhat - normalized(r, c) * mean_dxhat_xhat));
            }
          }
        }
      });
}

Var L2NormalizeRows(Var x, bool zero_passthrough) {
  constexpr Accum kMinNorm = 1e-12;
  const DenseMatrix& xv = x.value();
  DenseMatrix out = xv;
  std::vector<Scalar> inv_norm(xv.rows(), 0);
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    const Accum norm = std::sqrt(SquaredNorm(xv.row(r)));
    if (norm <= kMinNorm) {
      if (!zero_passthrough) {
        throw DegenerateInputError("l2_normalize: row " + std::to_string(r) +
                                   " has near-zero norm");
      }
      continue;
    }
    inv_norm[r] = static_cast<Scalar>(1.0 / norm);
    for (Scalar& v : out.row(r)) v = static_cast<Scalar>(v / norm);
  }
  const std::size_t ix = x.id();
  return x.graph().Emit(
      std::move(out), {x},
      [ix, inv_norm = std::move(inv_norm)](Graph& g, std::size_t self) {
        DenseMatrix* dx = g.grad_sink(ix);
        if (dx == nullptr) return;
        const DenseMatrix& up = g.upstream(self);
        const DenseMatrix& y = g.value_at(self);
        for (std::size_t r = 0; r < y.rows(); ++r) {
          if (inv_norm[r] == Scalar{0}) continue;
          auto yr = y.row(r);
          auto ur = up.row(r);
          Accum dot = 0;
          for (std::size_t c = 0; c < yr.size(); ++c) dot += Accum(yr[c]) * ur[c];
          auto dst = dx->row(r);
          for (std::size_t c = 0; c < yr.size(); ++c) {
            dst[c] += static_cast<Scalar>((ur[c] - yr[c] * dot) * inv_norm[r]);
          }
        }
      });
}

Var ConcatRows(std::span<const Var> parts) {
  if (parts.empty()) throw DegenerateInputError("concat of zero parts");
  Graph& g = parts.front().graph();
  const std::size_t cols = parts.front().value().cols();
  std::size_t rows = 0;
  for (Var p : parts) {
    RequireSameGraph(parts.front(), p);
    if (p.value().cols() != cols) {
      throw DimensionError("concat_rows: column count " +
                           std::to_string(p.value().cols()) + " vs " +
                           std::to_string(cols));
    }
    rows += p.value().rows();
  }
  std::vector<Scalar> data;
  data.reserve(rows * cols);
  std::vector<std::size_t> ids;
  std::vector<std::size_t> offsets;
  for (Var p : parts) {
    ids.push_back(p.id());
    offsets.push_back(data.size());
    auto src = p.value().data();
    data.insert(data.end(), src.begin(), src.end());
  }
  return g.Emit(DenseMatrix(rows, cols, std::move(data)), parts,
                [ids = std::move(ids), offsets = std::move(offsets)](
                    Graph& g, std::size_t self) {
                  const DenseMatrix& up = g.upstream(self);
                  for (std::size_t k = 0; k < ids.size(); ++k) {
                    DenseMatrix* dp = g.grad_sink(ids[k]);
                    if (dp == nullptr) continue;
                    for (std::size_t i = 0; i < dp->size(); ++i) {
                      (*dp)[i] += up[offsets[k] + i];
                    }
                  }
                });
}

Var Reshape(Var x, std::size_t rows, std::size_t cols) {
  DenseMatrix out = x.value().Reshaped(rows, cols);
  const std::size_t ix = x.id();
  return x.graph().Emit(std::move(out), {x}, [ix](Graph& g, std::size_t self) {
    if (DenseMatrix* dx = g.grad_sink(ix)) {
      const DenseMatrix& up = g.upstream(self);
      for (std::size_t i = 0; i < up.size(); ++i) (*dx)[i] += up[i];
    }
  });
}

Var Sum(Var x) {
  Accum acc = 0;
  for (Scalar v : x.value().data()) acc += v;
  DenseMatrix out(1, 1, static_cast<Scalar>(acc));
  const std::size_t ix = x.id();
  return x.graph().Emit(std::move(out), {x}, [ix](Graph& g, std::size_t self) {
    if (DenseMatrix* dx = g.grad_sink(ix)) {
      const Scalar up = g.upstream(self)[0];
      for (Scalar& v : dx->data()) v += up;
    }
  });
}

Var Mean(Var x) {
  const std::size_t n = x.value().size();
  if (n == 0) throw DegenerateInputError("mean of an empty matrix");
  return Scale(Sum(x), Scalar(1) / static_cast<Scalar>(n));
}

Var SumSquares(Var x) {
  DenseMatrix out(1, 1, static_cast<Scalar>(FrobeniusNormSquared(x.value())));
  const std::size_t ix = x.id();
  return x.graph().Emit(std::move(out), {x}, [ix](Graph& g, std::size_t self) {
    if (DenseMatrix* dx = g.grad_sink(ix)) {
      const Scalar up = g.upstream(self)[0];
      const DenseMatrix& xv = g.value_at(ix);
      for (std::size_t i = 0; i < xv.size(); ++i) (*dx)[i] += 2 * up * xv[i];
    }
  });
}

Var Gather(Var x, std::span<const std::pair<std::size_t, std::size_t>> at) {
  const DenseMatrix& xv = x.value();
  DenseMatrix out(at.size(), 1);
  std::vector<std::size_t> flat;
  flat.reserve(at.size());
  for (std::size_t k = 0; k < at.size(); ++k) {
    const auto [r, c] = at[k];
    if (r >= xv.rows() || c >= xv.cols()) {
      throw DimensionError("gather: index (" + std::to_string(r) + "," +
                           std::to_string(c) + ") outside " + xv.ShapeString());
    }
    flat.push_back(r * xv.cols() + c);
    out[k] = xv[flat.back()];
  }
  const std::size_t ix = x.id();
  return x.graph().Emit(
      std::move(out), {x},
      [ix, flat = std::move(flat)](Graph& g, std::size_t self) {
        if (DenseMatrix* dx = g.grad_sink(ix)) {
          const DenseMatrix& up = g.upstream(self);
          for (std::size_t k = 0; k < flat.size(); ++k) (*dx)[flat[k]] += up[k];
        }
      });
}

Var PairwiseDistances(Var a, Var b) {
  RequireSameGraph(a, b);
  const DenseMatrix& av = a.value();
  const DenseMatrix& bv = b.value();
  if (av.cols() != bv.cols()) {
    throw DimensionError("pairwise_distances: " + av.ShapeString() + " vs " +
                         bv.ShapeString());
  }
  DenseMatrix out(av.rows(), bv.rows());
  for (std::size_t i = 0; i < av.rows(); ++i) {
    auto ai = av.row(i);
    for (std::size_t j = 0; j < bv.rows(); ++j) {
      auto bj = bv.row(j);
      Accum acc = 0;
      for (std::size_t k = 0; k < ai.size(); ++k) {
        const Accum d = Accum(ai[k]) - bj[k];
        acc += d * d;
      }
      out(i, j) = static_cast<Scalar>(std::sqrt(acc));
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().Emit(
      std::move(out), {a, b}, [ia, ib](Graph& g, std::size_t self) {
        const DenseMatrix& up = g.upstream(self);
        const DenseMatrix& dist = g.value_at(self);
        const DenseMatrix& av = g.value_at(ia);
        const DenseMatrix& bv = g.value_at(ib);
        DenseMatrix* da = g.grad_sink(ia);
        DenseMatrix* db = g.grad_sink(ib);
        for (std::size_t i = 0; i < av.rows(); ++i) {
          for (std::size_t j = 0; j < bv.rows(); ++j) {
            const Scalar d = dist(i, j);
            if (d == Scalar{0} || up(i, j) == Scalar{0}) continue;
            const Scalar w = up(i, j) / d;
            auto ai = av.row(i);
            auto bj = bv.row(j);
            for (std::size_t k = 0; k < ai.size(); ++k) {
              const Scalar diff = w * (ai[k] - bj[k]);
              if (da != nullptr) (*da)(i, k) += diff;
              if (db != nullptr) (*db)(j, k) -= diff;
            }
          }
        }
      });
}

DenseMatrix SoftmaxColumns(const DenseMatrix& logits) {
  Graph g(Graph::Mode::kInference);
  return SoftmaxColumns(g.ConstantRef(logits)).value();
}

DenseMatrix LayerNorm(const DenseMatrix& x, const DenseMatrix& gain,
                      const DenseMatrix& bias, Scalar epsilon) {
  Graph g(Graph::Mode::kInference);
  return LayerNorm(g.ConstantRef(x), g.ConstantRef(gain), g.ConstantRef(bias),
                   epsilon)
      .value();
}

DenseMatrix L2Normalize(const DenseMatrix& v) {
  Graph g(Graph::Mode::kInference);
  const DenseMatrix flat = v.Reshaped(1, v.size());
  return L2NormalizeRows(g.ConstantRef(flat)).value().Reshaped(v.rows(),
                                                               v.cols());
}

}  // namespace MAGVLAQ_ABI
}  // namespace magvlaq
