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


#include "magvlaq/numerics/random.h"

namespace magvlaq {
inline namespace MAGVLAQ_ABI {

std::uint64_t Fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Rng NamedRng(std::uint64_t seed, std::string_view name) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(Fnv1a(name)),
                    static_cast<std::uint32_t>(Fnv1a(name) >> 32)};
  return Rng(seq);
}

DenseMatrix RandomNormal(std::size_t rows, std::size_t cols, double stddev,
                         Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  DenseMatrix m(rows, cols);
  for (Scalar& v : m.data()) v = static_cast<Scalar>(dist(rng));
  return m;
}

}  // namespace MAGVLAQ_ABI
}  // namespace magvlaq
