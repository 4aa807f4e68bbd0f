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


#include "magvlaq/numerics/mlp.h"

#include <cmath>

#include "magvlaq/errors.h"
#include "magvlaq/numerics/random.h"

namespace magvlaq {
inline namespace MAGVLAQ_ABI {

void InitMlp(ParamStore& store, const std::string& prefix,
             std::span<const std::size_t> dims, std::uint64_t seed,
             bool zero_last_layer) {
  if (dims.size() < 2) {
    throw ConfigError("mlp '" + prefix + "' needs at least two widths");
  }
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const std::string w = prefix + ".w" + std::to_string(k);
    const std::string b = prefix + ".b" + std::to_string(k);
    const bool last = k + 2 == dims.size();
    if (last && zero_last_layer) {
      store.Add(w, DenseMatrix(dims[k], dims[k + 1]));
    } else {
      Rng rng = NamedRng(seed, w);
      store.Add(w, RandomNormal(dims[k], dims[k + 1],
                                1.0 / std::sqrt(static_cast<double>(dims[k])),
                                rng));
    }
    store.Add(b, DenseMatrix(1, dims[k + 1]));
  }
}

std::vector<MlpLayer> BindMlp(Graph& g, ParamStore& store,
                              const std::string& prefix) {
  std::vector<MlpLayer> layers;
  for (std::size_t k = 0;; ++k) {
    const std::string w = prefix + ".w" + std::to_string(k);
    if (!store.contains(w)) break;
    layers.push_back(
        {g.Parameter(store, w), g.Parameter(store, prefix + ".b" + std::to_string(k)), w});
  }
  if (layers.empty()) throw ConfigError("no mlp layers under '" + prefix + "'");
  return layers;
}

Var MlpForward(Var x, std::span<const MlpLayer> layers, Activation activation) {
  if (layers.empty()) throw ConfigError("mlp with no layers");
  Var h = x;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const DenseMatrix& w = layers[k].weight.value();
    const DenseMatrix& b = layers[k].bias.value();
    if (h.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols()) {
      const std::string layer =
          layers[k].name.empty() ? "mlp layer " + std::to_string(k) : layers[k].name;
      throw ConfigError(layer + ": input width " +
                        std::to_string(h.cols()) + " does not chain into weight " +
                        w.ShapeString() + " / bias " + b.ShapeString());
    }
    h = AddRowBroadcast(Matmul(h, layers[k].weight), layers[k].bias);
    if (k + 1 < layers.size()) {
      h = activation == Activation::kTanh ? Tanh(h) : Relu(h);
    }
  }
  return h;
}

}  // namespace MAGVLAQ_ABI
}  // namespace magvlaq
