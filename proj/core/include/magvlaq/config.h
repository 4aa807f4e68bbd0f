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

// Scalar selection. The default library stores values as 32-bit floats; the
// gradient-check build (MAGVLAQ_USE_DOUBLE=1) compiles the same sources in
// double precision into a distinct inline namespace so both variants can be
// linked into one binary.
#ifndef MAGVLAQ_USE_DOUBLE
#define MAGVLAQ_USE_DOUBLE 0
#endif

#if MAGVLAQ_USE_DOUBLE
#define MAGVLAQ_ABI f64
#else
#define MAGVLAQ_ABI f32
#endif

namespace magvlaq {
inline namespace MAGVLAQ_ABI {

#if MAGVLAQ_USE_DOUBLE
using Scalar = double;
#else
using Scalar = float;
#endif

// Accumulator for reductions (softmax denominators, norms, loss sums).
using Accum = double;

}  // namespace MAGVLAQ_ABI
}  // namespace magvlaq
