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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "magvlaq/numerics/matrix.h"

namespace magvlaq {
inline namespace MAGVLAQ_ABI {

// MAGT container, little-endian:
//   [0, 4)    "MAGT"
//   [4, 8)    u32 version (1)
//   [8, 16)   u64 header length H
//   [16, 16+H) UTF-8 JSON header {"entries": [...], "meta": {...}?}
//   remainder: f32 row-major blobs at 4-byte aligned, ascending,
//              non-overlapping offsets relative to the blob region start.

inline constexpr std::uint32_t kMagtVersion = 1;

struct MagtTensor {
  std::string name;
  DenseMatrix data;
};

struct MagtEntry {
  std::string id;
  std::string kind;
  double east = 0;
  double north = 0;
  std::optional<std::string> split;
  std::optional<std::string> modality_tag;
  std::vector<MagtTensor> tensors;
};

struct MagtFile {
  std::vector<MagtEntry> entries;
  /// Free-form metadata (checkpoint config, optimizer step). Omitted from the
  /// header when null.
  nlohmann::json meta;
};

/// Returns the number of bytes written. IoError carries the path.
std::uint64_t WriteMagt(const MagtFile& file, const std::filesystem::path& path);
std::vector<std::uint8_t> EncodeMagt(const MagtFile& file);

/// Throws BadMagicError, UnsupportedVersionError, TruncatedFileError,
/// CorruptionError or FormatError (malformed header JSON).
MagtFile ReadMagt(const std::filesystem::path& path);
MagtFile DecodeMagt(const std::vector<std::uint8_t>& bytes);

}  // namespace MAGVLAQ_ABI
}  // namespace magvlaq
