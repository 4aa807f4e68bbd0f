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


#include "magvlaq/numerics/param_store.h"

#include "magvlaq/errors.h"

namespace magvlaq {
inline namespace MAGVLAQ_ABI {

Parameter& ParamStore::Add(const std::string& name, DenseMatrix init) {
  if (params_.count(name) != 0) {
    throw ConfigError("duplicate parameter name '" + name + "'");
  }
  Parameter p;
  p.grad = DenseMatrix(init.rows(), init.cols());
  p.first_moment = DenseMatrix(init.rows(), init.cols());
  p.second_moment = DenseMatrix(init.rows(), init.cols());
  p.value = std::move(init);
  return params_.emplace(name, std::move(p)).first->second;
}

Parameter& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) {
    throw ConfigError("unknown parameter '" + name + "'");
  }
  return it->second;
}

const Parameter& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) {
    throw ConfigError("unknown parameter '" + name + "'");
  }
  return it->second;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, _] : params_) out.push_back(name);
  return out;
}

std::size_t ParamStore::NumScalars() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += p.value.size();
  return n;
}

void ParamStore::ZeroGrad() {
  for (auto& [_, p] : params_) p.grad.Fill(Scalar{0});
}

}  // namespace MAGVLAQ_ABI
}  // namespace magvlaq
