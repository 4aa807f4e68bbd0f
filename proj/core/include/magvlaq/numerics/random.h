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
#include <random>
#include <string_view>

#include "magvlaq/numerics/matrix.h"

namespace magvlaq {
inline namespace MAGVLAQ_ABI {

using Rng = std::mt19937_64;

/// 64-bit FNV-1a; stable across platforms, unlike std::hash.
std::uint64_t Fnv1a(std::string_view text);

/// Generator derived from a run seed and a stream name, so that adding or
/// skipping one stream never perturbs another.
Rng NamedRng(std::uint64_t seed, std::string_view name);

DenseMatrix RandomNormal(std::size_t rows, std::size_t cols, double stddev,
                         Rng& rng);

}  // namespace MAGVLAQ_ABI
}  // namespace magvlaq
