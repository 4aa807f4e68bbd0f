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
#include <map>
#include <string>
#include <vector>

#include "magvlaq/numerics/matrix.h"

namespace magvlaq {
inline namespace MAGVLAQ_ABI {

/// A trainable tensor with its gradient accumulator and Adam moments.
struct Parameter {
  DenseMatrix value;
  DenseMatrix grad;
  DenseMatrix first_moment;
  DenseMatrix second_moment;
};

/// Named parameters of a model. Iteration order is lexicographic by name,
/// which keeps serialization and optimizer updates deterministic.
class ParamStore {
 public:
  /// Registers a new parameter. Throws ConfigError on a duplicate name.
  Parameter& Add(const std::string& name, DenseMatrix init);

  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const {
    return params_.count(name) != 0;
  }

  std::vector<std::string> names() const;
  std::size_t size() const { return params_.size(); }
  std::size_t NumScalars() const;

  void ZeroGrad();

  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t step) { step_ = step; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::map<std::string, Parameter> params_;
  std::uint64_t step_ = 0;
};

}  // namespace MAGVLAQ_ABI
}  // namespace magvlaq
