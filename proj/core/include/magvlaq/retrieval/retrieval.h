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

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "magvlaq/conditioning/model.h"

namespace magvlaq {
inline namespace MAGVLAQ_ABI {

/// Euclidean distance. DimensionError on mismatched dims.
double DescriptorDistance(std::span<const Scalar> a, std::span<const Scalar> b);
double DescriptorDistance(const Descriptor& a, const Descriptor& b);

struct DatabaseEntry {
  std::string id;
  GeoPoint geo;
  Descriptor descriptor;
};

/// Immutable after construction; entries keep the reference order.
struct DescriptorDatabase {
  std::vector<DatabaseEntry> entries;
  std::string modality_tag;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

/// Thread count for evaluation: MAGVLAQ_THREADS when set and positive, else
/// the hardware concurrency (at least 1).
std::size_t EvalThreads();

/// One aerial descriptor per reference. ConfigError on mixed modality tags
/// or an empty list. `threads` = 0 uses EvalThreads().
DescriptorDatabase BuildDatabase(std::span<const AerialReference> references,
                                 Model& model, std::size_t threads = 0);

struct Neighbor {
  std::size_t index = 0;
  std::string id;
  double distance = 0;
};

/// Exact top-K by ascending distance, ties broken by ascending id. K is
/// clipped to the database size. ContractError on an empty database or K=0.
std::vector<Neighbor> KnnSearch(std::span<const Scalar> query,
                                const DescriptorDatabase& db, std::size_t k);
std::vector<Neighbor> KnnSearch(const Descriptor& query,
                                const DescriptorDatabase& db, std::size_t k);

struct QueryDescriptor {
  GeoPoint geo;
  Descriptor descriptor;
};

/// Ground descriptors of `queries` under `mask`, computed in parallel.
std::vector<QueryDescriptor> DescribeQueries(
    Model& model, std::span<const GroundObservation* const> queries,
    ModalityMask mask = ModalityMask::kBoth, std::size_t threads = 0);

struct EvalReport {
  std::map<std::size_t, double> recall_at;
  std::size_t num_queries = 0;  // queries in the denominator
  std::size_t excluded = 0;     // queries without any in-radius reference
  double radius_m = 25.0;
};

/// A query scores at K when one of its top-K references lies within
/// `radius_m`. Queries with no in-radius reference anywhere are excluded.
/// ContractError for radius <= 0, an empty K list or K = 0.
EvalReport RecallAtK(std::span<const QueryDescriptor> queries,
                     const DescriptorDatabase& db,
                     std::span<const std::size_t> ks, double radius_m,
                     std::size_t threads = 0);

nlohmann::json ToJson(const EvalReport& report);

/// CSV "token_index,q0,..,q{S-1}" with one row per token, 9 significant
/// digits. Returns the number of data rows.
std::size_t WriteHeatmapCsv(const DenseMatrix& weights,
                            const std::filesystem::path& path);
std::size_t DumpAssignmentHeatmap(Model& model, const GroundObservation& obs,
                                  const std::filesystem::path& path,
                                  ModalityMask mask = ModalityMask::kBoth);
std::size_t DumpAssignmentHeatmap(Model& model, const AerialReference& ref,
                                  const std::filesystem::path& path);

}  // namespace MAGVLAQ_ABI
}  // namespace magvlaq
