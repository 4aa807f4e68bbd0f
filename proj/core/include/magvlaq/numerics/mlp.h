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

#include "magvlaq/numerics/autodiff.h"

namespace magvlaq {
inline namespace MAGVLAQ_ABI {

enum class Activation { kTanh, kRelu };

struct MlpLayer {
  Var weight;  // fan_in × fan_out
  Var bias;    // 1 × fan_out
  std::string name;  // weight parameter name, used in errors
};

/// Registers `<prefix>.w<k>` / `<prefix>.b<k>` for each consecutive pair in
/// `dims`. Weights are N(0, 1/fan_in), biases zero. With `zero_last_layer`
/// the final weight is zero as well, so the net outputs exactly zero until
/// trained.
void InitMlp(ParamStore& store, const std::string& prefix,
             std::span<const std::size_t> dims, std::uint64_t seed,
             bool zero_last_layer = false);

/// Binds every stored layer of `prefix` into graph `g`, in order.
std::vector<MlpLayer> BindMlp(Graph& g, ParamStore& store,
                              const std::string& prefix);

/// Applies the layers to every row of `x`. All layers but the last are
/// followed by `activation`. Throws ConfigError naming the first layer whose
/// input width does not match.
Var MlpForward(Var x, std::span<const MlpLayer> layers,
               Activation activation = Activation::kTanh);

}  // namespace MAGVLAQ_ABI
}  // namespace magvlaq
