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


#include "magvlaq/tokens/magt.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "magvlaq/errors.h"

namespace magvlaq {
inline namespace MAGVLAQ_ABI {

namespace {

constexpr char kMagic[4] = {'M', 'A', 'G', 'T'};
constexpr std::size_t kPreambleBytes = 16;

template <typename T>
void PutLe(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
}

template <typename T>
T GetLe(const std::uint8_t* p) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(p[i]) << (8 * i);
  }
  return value;
}

void PutF32(std::vector<std::uint8_t>& out, float value) {
  PutLe(out, std::bit_cast<std::uint32_t>(value));
}

float GetF32(const std::uint8_t* p) {
  return std::bit_cast<float>(GetLe<std::uint32_t>(p));
}

}  // namespace

std::vector<std::uint8_t> EncodeMagt(const MagtFile& file) {
  nlohmann::json entries = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const MagtEntry& e : file.entries) {
    nlohmann::json j;
    j["id"] = e.id;
    j["kind"] = e.kind;
    j["geo"] = {e.east, e.north};
    if (e.split) j["split"] = *e.split;
    if (e.modality_tag) j["modality_tag"] = *e.modality_tag;
    nlohmann::json tensors = nlohmann::json::array();
    for (const MagtTensor& t : e.tensors) {
      tensors.push_back({{"name", t.name},
                         {"rows", t.data.rows()},
                         {"cols", t.data.cols()},
                         {"offset", offset}});
      offset += 4 * t.data.size();
    }
    j["tensors"] = std::move(tensors);
    entries.push_back(std::move(j));
  }
  nlohmann::json header;
  header["entries"] = std::move(entries);
  if (!file.meta.is_null()) header["meta"] = file.meta;
  std::string text = header.dump();
  // pad with JSON whitespace so the blob region starts 8-byte aligned
  while ((kPreambleBytes + text.size()) % 8 != 0) text.push_back(' ');

  std::vector<std::uint8_t> out;
  out.reserve(kPreambleBytes + text.size() + offset);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  PutLe<std::uint32_t>(out, kMagtVersion);
  PutLe<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const MagtEntry& e : file.entries) {
    for (const MagtTensor& t : e.tensors) {
      for (Scalar v : t.data.data()) PutF32(out, static_cast<float>(v));
    }
  }
  return out;
}

std::uint64_t WriteMagt(const MagtFile& file,
                        const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = EncodeMagt(file);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write to '" + path.string() + "' failed");
  return bytes.size();
}

MagtFile DecodeMagt(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw BadMagicError("not a MAGT file (bad magic bytes)");
  }
  if (bytes.size() < kPreambleBytes) {
    throw TruncatedFileError("MAGT preamble truncated");
  }
  const auto version = GetLe<std::uint32_t>(bytes.data() + 4);
  if (version != kMagtVersion) {
    throw UnsupportedVersionError("unsupported MAGT version " +
                                  std::to_string(version));
  }
  const auto header_len = GetLe<std::uint64_t>(bytes.data() + 8);
  if (header_len > bytes.size() - kPreambleBytes) {
    throw TruncatedFileError("MAGT header length " + std::to_string(header_len) +
                             " exceeds file size");
  }
  const auto* header_begin =
      reinterpret_cast<const char*>(bytes.data() + kPreambleBytes);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_begin, header_begin + header_len);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("MAGT header is not valid JSON: ") + e.what());
  }
  const std::uint8_t* blob = bytes.data() + kPreambleBytes + header_len;
  const std::uint64_t blob_size = bytes.size() - kPreambleBytes - header_len;

  MagtFile file;
  try {
    if (!header.contains("entries") || !header["entries"].is_array()) {
      throw FormatError("MAGT header lacks an 'entries' array");
    }
    if (header.contains("meta")) file.meta = header["meta"];
    std::uint64_t next_free = 0;
    for (const auto& j : header["entries"]) {
      MagtEntry e;
      e.id = j.at("id").get<std::string>();
      e.kind = j.at("kind").get<std::string>();
      const auto& geo = j.at("geo");
      if (!geo.is_array() || geo.size() != 2) {
        throw FormatError("entry '" + e.id + "': geo must be [east, north]");
      }
      e.east = geo[0].get<double>();
      e.north = geo[1].get<double>();
      if (j.contains("split")) e.split = j["split"].get<std::string>();
      if (j.contains("modality_tag")) {
        e.modality_tag = j["modality_tag"].get<std::string>();
      }
      for (const auto& t : j.at("tensors")) {
        const auto rows = t.at("rows").get<std::uint64_t>();
        const auto cols = t.at("cols").get<std::uint64_t>();
        const auto offset = t.at("offset").get<std::uint64_t>();
        const std::string name = t.at("name").get<std::string>();
        if (offset % 4 != 0) {
          throw CorruptionError("tensor '" + e.id + "/" + name +
                                "' offset is not 4-byte aligned");
        }
        if (offset < next_free) {
          throw CorruptionError("tensor '" + e.id + "/" + name +
                                "' overlaps or precedes an earlier blob");
        }
        if (cols != 0 && rows > (blob_size / 4) / cols) {
          throw TruncatedFileError("tensor '" + e.id + "/" + name +
                                   "' extends past end of file");
        }
        const std::uint64_t bytes_needed = 4 * rows * cols;
        if (offset > blob_size || bytes_needed > blob_size - offset) {
          throw TruncatedFileError("tensor '" + e.id + "/" + name +
                                   "' extends past end of file");
        }
        std::vector<Scalar> data(rows * cols);
        for (std::size_t k = 0; k < data.size(); ++k) {
          data[k] = static_cast<Scalar>(GetF32(blob + offset + 4 * k));
        }
        e.tensors.push_back({name, DenseMatrix(rows, cols, std::move(data))});
        next_free = offset + bytes_needed;
      }
      file.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed MAGT header: ") + e.what());
  }
  return file;
}

MagtFile ReadMagt(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  try {
    return DecodeMagt(bytes);
  } catch (const FormatError& e) {
    // keep the concrete error type, add the path
    const std::string where = path.string() + ": ";
    if (dynamic_cast<const BadMagicError*>(&e)) throw BadMagicError(where + e.what());
    if (dynamic_cast<const UnsupportedVersionError*>(&e)) {
      throw UnsupportedVersionError(where + e.what());
    }
    if (dynamic_cast<const TruncatedFileError*>(&e)) {
      throw TruncatedFileError(where + e.what());
    }
    if (dynamic_cast<const CorruptionError*>(&e)) throw CorruptionError(where + e.what());
    throw FormatError(where + e.what());
  }
}

}  // namespace MAGVLAQ_ABI
}  // namespace magvlaq
