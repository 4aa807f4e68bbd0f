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

#include <stdexcept>
#include <string>

#include "magvlaq/config.h"

namespace magvlaq {
inline namespace MAGVLAQ_ABI {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Input is empty, zero-norm or otherwise too degenerate to process.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Invalid model, dataset or run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Caller violated an API precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value appeared during integration, loss evaluation or an
/// optimizer step.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// MAGT container errors. Each failure mode has its own type so callers can
// tell a wrong file apart from a damaged one.
class FormatError : public Error {
 public:
  using Error::Error;
};
class BadMagicError : public FormatError {
 public:
  using FormatError::FormatError;
};
class UnsupportedVersionError : public FormatError {
 public:
  using FormatError::FormatError;
};
class TruncatedFileError : public FormatError {
 public:
  using FormatError::FormatError;
};
class CorruptionError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// A loaded or supplied dataset breaks one of its invariants.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace MAGVLAQ_ABI
}  // namespace magvlaq
