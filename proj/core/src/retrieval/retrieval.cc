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


#include "magvlaq/retrieval/retrieval.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include "magvlaq/errors.h"

namespace magvlaq {
inline namespace MAGVLAQ_ABI {

double DescriptorDistance(std::span<const Scalar> a, std::span<const Scalar> b) {
  if (a.size() != b.size()) {
    throw DimensionError("descriptor dims differ: " + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()));
  }
  Accum s = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const Accum d = Accum(a[k]) - Accum(b[k]);
    s += d * d;
  }
  return std::sqrt(static_cast<double>(s));
}

double DescriptorDistance(const Descriptor& a, const Descriptor& b) {
  return DescriptorDistance(std::span<const Scalar>(a.values),
                            std::span<const Scalar>(b.values));
}

std::size_t EvalThreads() {
  if (const char* env = std::getenv("MAGVLAQ_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

// Runs body(i) for i in [0, n) on up to `threads` workers; the first
// exception is rethrown on the caller's thread.
template <typename Body>
void ParallelFor(std::size_t n, std::size_t threads, Body body) {
  if (threads == 0) threads = EvalThreads();
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

DescriptorDatabase BuildDatabase(std::span<const AerialReference> references,
                                 Model& model, std::size_t threads) {
  if (references.empty()) throw ConfigError("no aerial references to index");
  DescriptorDatabase db;
  db.modality_tag = references.front().modality_tag;
  for (const AerialReference& r : references) {
    if (r.modality_tag != db.modality_tag) {
      throw ConfigError("mixed aerial modalities: '" + db.modality_tag +
                        "' and '" + r.modality_tag + "'");
    }
  }
  db.entries.resize(references.size());
  ParallelFor(references.size(), threads, [&](std::size_t j) {
    const AerialReference& r = references[j];
    db.entries[j] = {r.id(), r.geo(), model.AerialDescriptor(r)};
  });
  return db;
}

std::vector<QueryDescriptor> DescribeQueries(
    Model& model, std::span<const GroundObservation* const> queries,
    ModalityMask mask, std::size_t threads) {
  std::vector<QueryDescriptor> out(queries.size());
  ParallelFor(queries.size(), threads, [&](std::size_t i) {
    out[i] = {queries[i]->geo(), model.GroundDescriptor(*queries[i], mask)};
  });
  return out;
}

std::vector<Neighbor> KnnSearch(std::span<const Scalar> query,
                                const DescriptorDatabase& db, std::size_t k) {
  if (db.empty()) throw ContractError("knn search over an empty database");
  if (k == 0) throw ContractError("knn search needs K >= 1");
  std::vector<Neighbor> all(db.size());
  for (std::size_t j = 0; j < db.size(); ++j) {
    all[j] = {j, db.entries[j].id,
              DescriptorDistance(query, db.entries[j].descriptor.values)};
  }
  k = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k),
                    all.end(), [](const Neighbor& a, const Neighbor& b) {
                      if (a.distance != b.distance) return a.distance < b.distance;
                      return a.id < b.id;
                    });
  all.resize(k);
  return all;
}

std::vector<Neighbor> KnnSearch(const Descriptor& query,
                                const DescriptorDatabase& db, std::size_t k) {
  return KnnSearch(std::span<const Scalar>(query.values), db, k);
}

EvalReport RecallAtK(std::span<const QueryDescriptor> queries,
                     const DescriptorDatabase& db,
                     std::span<const std::size_t> ks, double radius_m,
                     std::size_t threads) {
  if (!(radius_m > 0)) throw ContractError("recall radius must be positive");
  if (ks.empty()) throw ContractError("recall needs at least one K");
  for (std::size_t k : ks) {
    if (k == 0) throw ContractError("recall K must be >= 1");
  }
  const std::size_t k_max = *std::max_element(ks.begin(), ks.end());

  // rank of the first in-radius hit per query (db.size() when none exists)
  const std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> first_hit(queries.size(), none);
  std::vector<char> answerable(queries.size(), 0);
  ParallelFor(queries.size(), threads, [&](std::size_t i) {
    const GeoPoint q = queries[i].geo;
    for (const DatabaseEntry& e : db.entries) {
      if (GeoDistance(q, e.geo) <= radius_m) {
        answerable[i] = 1;
        break;
      }
    }
    if (!answerable[i]) return;
    const auto ranked = KnnSearch(queries[i].descriptor, db, k_max);
    for (std::size_t r = 0; r < ranked.size(); ++r) {
      if (GeoDistance(q, db.entries[ranked[r].index].geo) <= radius_m) {
        first_hit[i] = r;
        break;
      }
    }
  });

  EvalReport report;
  report.radius_m = radius_m;
  for (char a : answerable) {
    a ? ++report.num_queries : ++report.excluded;
  }
  for (std::size_t k : ks) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < queries.size(); ++i) {
      if (answerable[i] && first_hit[i] < k) ++hits;
    }
    report.recall_at[k] =
        report.num_queries == 0
            ? 0.0
            : static_cast<double>(hits) / static_cast<double>(report.num_queries);
  }
  return report;
}

nlohmann::json ToJson(const EvalReport& report) {
  nlohmann::json recall = nlohmann::json::object();
  for (const auto& [k, r] : report.recall_at) recall[std::to_string(k)] = r;
  return {{"recall", recall},
          {"num_queries", report.num_queries},
          {"excluded", report.excluded},
          {"radius_m", report.radius_m}};
}

std::size_t WriteHeatmapCsv(const DenseMatrix& weights,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "token_index";
  for (std::size_t s = 0; s < weights.cols(); ++s) out << ",q" << s;
  out << '\n';
  char buf[32];
  for (std::size_t n = 0; n < weights.rows(); ++n) {
    out << n;
    for (std::size_t s = 0; s < weights.cols(); ++s) {
      std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(weights(n, s)));
      out << ',' << buf;
    }
    out << '\n';
  }
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
  return weights.rows();
}

std::size_t DumpAssignmentHeatmap(Model& model, const GroundObservation& obs,
                                  const std::filesystem::path& path,
                                  ModalityMask mask) {
  return WriteHeatmapCsv(model.GroundAssignment(obs, mask), path);
}

std::size_t DumpAssignmentHeatmap(Model& model, const AerialReference& ref,
                                  const std::filesystem::path& path) {
  return WriteHeatmapCsv(model.AerialAssignment(ref), path);
}

}  // namespace MAGVLAQ_ABI
}  // namespace magvlaq
