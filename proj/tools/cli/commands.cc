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


#include "commands.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>

#include "magvlaq/errors.h"
#include "magvlaq/tokens/magt.h"

namespace magvlaq::cli {
namespace {

using nlohmann::json;

void ReadUnsigned(const json& v, const std::string& key, std::size_t& dst) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ConfigError("config key '" + key + "' must be a non-negative integer");
  }
  dst = v.get<std::size_t>();
}

void ReadSeed(const json& v, const std::string& key, std::uint64_t& dst) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ConfigError("config key '" + key + "' must be a non-negative integer");
  }
  dst = v.get<std::uint64_t>();
}

void ReadNumber(const json& v, const std::string& key, double& dst) {
  if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
  dst = v.get<double>();
}

void ReadString(const json& v, const std::string& key, std::string& dst) {
  if (!v.is_string()) throw ConfigError("config key '" + key + "' must be a string");
  dst = v.get<std::string>();
}

using Setter = std::function<void(RunConfig&, const json&, const std::string&)>;

#define MAGVLAQ_KEY(name, reader, field) \
  {name, [](RunConfig& c, const json& v, const std::string& k) { reader(v, k, c.field); }}

const std::map<std::string, Setter>& Schema() {
  static const std::map<std::string, Setter> schema = {
      MAGVLAQ_KEY("dataset", ReadString, dataset),
      MAGVLAQ_KEY("num_places", ReadUnsigned, synth.num_places),
      MAGVLAQ_KEY("observations_per_place", ReadUnsigned, synth.observations_per_place),
      MAGVLAQ_KEY("test_per_place", ReadUnsigned, synth.test_per_place),
      MAGVLAQ_KEY("scales", ReadUnsigned, synth.scales),
      MAGVLAQ_KEY("tokens_per_scale", ReadUnsigned, synth.tokens_per_scale),
      MAGVLAQ_KEY("aerial_tokens", ReadUnsigned, synth.aerial_tokens),
      MAGVLAQ_KEY("raw_dim", ReadUnsigned, synth.raw_dim),
      MAGVLAQ_KEY("latent_dim", ReadUnsigned, synth.latent_dim),
      MAGVLAQ_KEY("noise", ReadNumber, synth.noise),
      MAGVLAQ_KEY("place_spacing_m", ReadNumber, synth.place_spacing_m),
      MAGVLAQ_KEY("modality_tag", ReadString, synth.modality_tag),
      MAGVLAQ_KEY("num_queries", ReadUnsigned, model.vlaq.num_queries),
      MAGVLAQ_KEY("token_dim", ReadUnsigned, model.vlaq.token_dim),
      MAGVLAQ_KEY("out_dim", ReadUnsigned, model.vlaq.out_dim),
      MAGVLAQ_KEY("fusion_dim", ReadUnsigned, model.fusion_dim),
      MAGVLAQ_KEY("ode_horizon", ReadNumber, model.ode_horizon),
      MAGVLAQ_KEY("ode_steps", ReadUnsigned, model.ode_steps),
      MAGVLAQ_KEY("alpha", ReadNumber, model.alpha),
      {"aggregator",
       [](RunConfig& c, const json& v, const std::string& k) {
         std::string s;
         ReadString(v, k, s);
         c.model.aggregator = ParseAggregator(s);
       }},
      MAGVLAQ_KEY("tau_p", ReadNumber, thresholds.tau_p),
      MAGVLAQ_KEY("tau_n", ReadNumber, thresholds.tau_n),
      MAGVLAQ_KEY("lambda_tri", ReadNumber, weights.lambda_tri),
      MAGVLAQ_KEY("lambda_aux", ReadNumber, weights.lambda_aux),
      MAGVLAQ_KEY("lambda_q", ReadNumber, weights.lambda_q),
      MAGVLAQ_KEY("margin", ReadNumber, weights.margin),
      MAGVLAQ_KEY("learning_rate", ReadNumber, optimizer.learning_rate),
      MAGVLAQ_KEY("beta1", ReadNumber, optimizer.beta1),
      MAGVLAQ_KEY("beta2", ReadNumber, optimizer.beta2),
      MAGVLAQ_KEY("epsilon", ReadNumber, optimizer.epsilon),
      MAGVLAQ_KEY("batch_size", ReadUnsigned, batch_size),
      MAGVLAQ_KEY("epochs", ReadUnsigned, epochs),
      MAGVLAQ_KEY("seed", ReadSeed, seed),
      {"modality_mask",
       [](RunConfig& c, const json& v, const std::string& k) {
         std::string s;
         ReadString(v, k, s);
         c.modality_mask = ParseModalityMask(s);
       }},
      MAGVLAQ_KEY("radius_m", ReadNumber, radius_m),
      {"ks",
       [](RunConfig& c, const json& v, const std::string& k) {
         if (!v.is_array() || v.empty()) {
           throw ConfigError("config key '" + k + "' must be a non-empty array");
         }
         c.ks.clear();
         for (const json& e : v) {
           std::size_t n = 0;
           ReadUnsigned(e, k, n);
           c.ks.push_back(n);
         }
       }},
  };
  return schema;
}

#undef MAGVLAQ_KEY

SynthConfig SynthFor(const RunConfig& config) {
  SynthConfig s = config.synth;
  s.tau_p = config.thresholds.tau_p;
  s.tau_n = config.thresholds.tau_n;
  return s;
}

std::string Fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void WriteJsonFile(const json& j, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << j.dump(2) << '\n';
  if (!f) throw IoError("write failed: " + path.string());
}

void CheckDatasetFits(const ModelConfig& c, const TokenDataset& ds) {
  if (ds.ground.empty() || ds.aerial.empty()) {
    throw ConfigError("dataset needs ground observations and aerial references");
  }
  const std::size_t raw = ds.ground.front().image.raw_dim();
  const std::size_t scales = ds.ground.front().image.scales.size();
  if (raw != c.raw_dim || scales != c.scales) {
    throw ConfigError("dimension mismatch: checkpoint expects raw_dim " +
                      std::to_string(c.raw_dim) + " with " +
                      std::to_string(c.scales) + " scales, dataset has " +
                      std::to_string(raw) + " with " + std::to_string(scales));
  }
}

}  // namespace

TrainConfig RunConfig::train() const {
  TrainConfig t;
  t.thresholds = thresholds;
  t.weights = weights;
  t.optimizer = optimizer;
  t.batch_size = batch_size;
  t.seed = seed;
  return t;
}

void RunConfig::Validate() const {
  ModelConfig m = model;
  m.raw_dim = synth.raw_dim;
  m.scales = synth.scales;
  m.Validate();
  train().Validate();
  if (!(radius_m > 0)) throw ConfigError("radius_m must be positive");
  if (ks.empty()) throw ConfigError("ks must not be empty");
  for (std::size_t k : ks) {
    if (k == 0) throw ConfigError("every K must be >= 1");
  }
}

void ApplyJson(RunConfig& config, const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  const auto& schema = Schema();
  RunConfig updated = config;
  for (const auto& [key, value] : j.items()) {
    auto it = schema.find(key);
    if (it == schema.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(updated, value, key);
  }
  updated.Validate();
  config = std::move(updated);
}

RunConfig LoadRunConfig(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  RunConfig config;
  ApplyJson(config, j);
  return config;
}

json ToJson(const RunConfig& c) {
  return {{"dataset", c.dataset},
          {"num_places", c.synth.num_places},
          {"observations_per_place", c.synth.observations_per_place},
          {"test_per_place", c.synth.test_per_place},
          {"scales", c.synth.scales},
          {"tokens_per_scale", c.synth.tokens_per_scale},
          {"aerial_tokens", c.synth.aerial_tokens},
          {"raw_dim", c.synth.raw_dim},
          {"latent_dim", c.synth.latent_dim},
          {"noise", c.synth.noise},
          {"place_spacing_m", c.synth.place_spacing_m},
          {"modality_tag", c.synth.modality_tag},
          {"num_queries", c.model.vlaq.num_queries},
          {"token_dim", c.model.vlaq.token_dim},
          {"out_dim", c.model.vlaq.out_dim},
          {"fusion_dim", c.model.fusion_dim},
          {"ode_horizon", c.model.ode_horizon},
          {"ode_steps", c.model.ode_steps},
          {"alpha", c.model.alpha},
          {"aggregator", std::string(ToString(c.model.aggregator))},
          {"tau_p", c.thresholds.tau_p},
          {"tau_n", c.thresholds.tau_n},
          {"lambda_tri", c.weights.lambda_tri},
          {"lambda_aux", c.weights.lambda_aux},
          {"lambda_q", c.weights.lambda_q},
          {"margin", c.weights.margin},
          {"learning_rate", c.optimizer.learning_rate},
          {"beta1", c.optimizer.beta1},
          {"beta2", c.optimizer.beta2},
          {"epsilon", c.optimizer.epsilon},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"modality_mask", std::string(ToString(c.modality_mask))},
          {"radius_m", c.radius_m},
          {"ks", c.ks}};
}

TokenDataset ResolveDataset(const RunConfig& config) {
  if (!config.dataset.empty()) {
    return LoadTokenFile(config.dataset, config.thresholds.tau_p);
  }
  return GenerateSyntheticDataset(SynthFor(config), config.seed);
}

ModelConfig ModelConfigFor(const RunConfig& config, const TokenDataset& dataset) {
  ModelConfig m = config.model;
  if (dataset.ground.empty()) throw ConfigError("dataset has no ground observations");
  m.raw_dim = dataset.ground.front().image.raw_dim();
  m.scales = dataset.ground.front().image.scales.size();
  m.Validate();
  return m;
}

EvalReport Evaluate(Model& model, const TokenDataset& dataset, ModalityMask mask,
                    std::span<const std::size_t> ks, double radius_m,
                    Split split) {
  std::vector<const GroundObservation*> queries;
  for (const GroundObservation& g : dataset.ground) {
    if (g.split == split) queries.push_back(&g);
  }
  const DescriptorDatabase db = BuildDatabase(dataset.aerial, model);
  const std::vector<QueryDescriptor> described =
      DescribeQueries(model, queries, mask);
  return RecallAtK(described, db, ks, radius_m);
}

std::string FormatMetricsRow(const EpochRow& r) {
  const EpochMetrics& m = r.metrics;
  return std::to_string(m.epoch) + "," + Fmt(m.l_tri) + "," + Fmt(m.l_aux) +
         "," + Fmt(m.l_q) + "," + Fmt(m.total) + "," + Fmt(r.recall1) + "," +
         Fmt(r.recall5) + "," + Fmt(r.recall10) + "," + Fmt(m.seconds);
}

std::vector<EpochRow> TrainModel(Model& model, const TokenDataset& dataset,
                                 const RunConfig& config,
                                 const std::function<void(const EpochRow&)>& on_epoch) {
  const TrainConfig train = config.train();
  const std::size_t ks[] = {1, 5, 10};
  std::vector<EpochRow> rows;
  for (std::size_t e = 0; e < config.epochs; ++e) {
    EpochRow row;
    row.metrics = TrainEpoch(model, dataset, train, e);
    row.metrics.epoch = e + 1;
    const EvalReport report =
        Evaluate(model, dataset, ModalityMask::kBoth, ks, config.radius_m);
    row.recall1 = report.recall_at.at(1);
    row.recall5 = report.recall_at.at(5);
    row.recall10 = report.recall_at.at(10);
    rows.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  return rows;
}

std::uint64_t WriteDescriptorFile(const DescriptorDatabase& db,
                                  const std::filesystem::path& path) {
  if (db.empty()) throw ConfigError("no descriptors to export");
  MagtFile file;
  for (const DatabaseEntry& e : db.entries) {
    MagtEntry m;
    m.id = e.id;
    m.kind = "descriptor";
    m.east = e.geo.east;
    m.north = e.geo.north;
    m.modality_tag = db.modality_tag;
    DenseMatrix row(1, e.descriptor.dim());
    std::copy(e.descriptor.values.begin(), e.descriptor.values.end(),
              row.row(0).begin());
    m.tensors.push_back({"descriptor", std::move(row)});
    file.entries.push_back(std::move(m));
  }
  file.meta = {{"content", "aerial-descriptors"},
               {"modality_tag", db.modality_tag}};
  return WriteMagt(file, path);
}

DescriptorDatabase ReadDescriptorFile(const std::filesystem::path& path) {
  MagtFile file = ReadMagt(path);
  DescriptorDatabase db;
  if (file.meta.is_object()) db.modality_tag = file.meta.value("modality_tag", "");
  for (MagtEntry& e : file.entries) {
    if (e.kind != "descriptor" || e.tensors.size() != 1 ||
        e.tensors[0].data.rows() != 1) {
      throw FormatError(path.string() + ": entry '" + e.id +
                        "' is not a 1-row descriptor");
    }
    auto row = e.tensors[0].data.row(0);
    db.entries.push_back({e.id,
                          {e.east, e.north},
                          {std::vector<Scalar>(row.begin(), row.end()),
                           Branch::kAerial}});
  }
  if (db.empty()) throw FormatError(path.string() + ": no descriptors");
  return db;
}

int CmdGenerate(const RunConfig& config, const std::filesystem::path& out_path,
                std::ostream& out) {
  if (out_path.empty()) throw ConfigError("generate needs --out");
  const TokenDataset ds = GenerateSyntheticDataset(SynthFor(config), config.seed);
  const std::uint64_t bytes = SaveTokenFile(ds, out_path, config.thresholds.tau_p);
  std::size_t test = 0;
  for (const auto& g : ds.ground) test += g.split == Split::kTest ? 1 : 0;
  out << "wrote " << ds.ground.size() << " ground observations ("
      << ds.ground.size() - test << " train, " << test << " test) and "
      << ds.aerial.size() << " aerial references to " << out_path.string()
      << " (" << bytes << " bytes)\n";
  return kExitOk;
}

int CmdTrain(const RunConfig& config, const std::filesystem::path& out_dir,
             std::ostream& out, std::ostream& err) {
  if (out_dir.empty()) throw ConfigError("train needs --out DIR");
  const TokenDataset ds = ResolveDataset(config);
  Model model(ModelConfigFor(config, ds), config.seed);

  std::filesystem::create_directories(out_dir);
  const auto csv_path = out_dir / "metrics.csv";
  const auto ckpt_path = out_dir / "checkpoint.magt";
  std::ofstream csv(csv_path);
  if (!csv) throw IoError("cannot open " + csv_path.string() + " for writing");
  csv << kMetricsHeader << '\n';

  double best = -1;
  std::size_t best_epoch = 0;
  try {
    TrainModel(model, ds, config, [&](const EpochRow& row) {
      csv << FormatMetricsRow(row) << '\n' << std::flush;
      out << "epoch " << row.metrics.epoch << " total " << Fmt(row.metrics.total)
          << " recall@1 " << Fmt(row.recall1) << '\n';
      if (row.recall1 > best) {
        best = row.recall1;
        best_epoch = row.metrics.epoch;
      }
    });
  } catch (const DivergenceError& e) {
    SaveCheckpoint(model, ckpt_path);
    err << "error: " << e.what() << " (last finite state saved to "
        << ckpt_path.string() << ")\n";
    return kExitDivergence;
  }
  SaveCheckpoint(model, ckpt_path);
  if (best_epoch == 0) {
    out << "best recall@1: n/a (no epochs run)\n";
  } else {
    out << "best recall@1: " << Fmt(best) << " (epoch " << best_epoch << ")\n";
  }
  return kExitOk;
}

int CmdEval(const RunConfig& config, const std::filesystem::path& checkpoint,
            const std::filesystem::path& out_path, std::ostream& out) {
  if (checkpoint.empty()) throw ConfigError("eval needs --checkpoint");
  Model model = LoadCheckpoint(checkpoint);
  const TokenDataset ds = ResolveDataset(config);
  CheckDatasetFits(model.config(), ds);
  const EvalReport report = Evaluate(model, ds, config.modality_mask, config.ks,
                                     config.radius_m);
  const json j = ToJson(report);
  if (out_path.empty()) {
    out << j.dump(2) << '\n';
  } else {
    WriteJsonFile(j, out_path);
  }
  return kExitOk;
}

int CmdExport(const RunConfig& config, const std::filesystem::path& checkpoint,
              const std::filesystem::path& out_path, std::ostream& out) {
  if (checkpoint.empty()) throw ConfigError("export needs --checkpoint");
  if (out_path.empty()) throw ConfigError("export needs --out");
  Model model = LoadCheckpoint(checkpoint);
  const TokenDataset ds = ResolveDataset(config);
  if (ds.aerial.empty()) throw ConfigError("dataset has no aerial references");
  CheckDatasetFits(model.config(), ds);
  const DescriptorDatabase db = BuildDatabase(ds.aerial, model);
  const std::uint64_t bytes = WriteDescriptorFile(db, out_path);
  out << "exported " << db.size() << " descriptors of dim "
      << db.entries.front().descriptor.dim() << " to " << out_path.string()
      << " (" << bytes << " bytes)\n";
  return kExitOk;
}

namespace {

void InspectDataset(const TokenDataset& ds, std::ostream& out) {
  std::size_t test = 0;
  for (const auto& g : ds.ground) test += g.split == Split::kTest ? 1 : 0;
  out << "ground observations: " << ds.ground.size() << " ("
      << ds.ground.size() - test << " train, " << test << " test)\n";
  out << "aerial references: " << ds.aerial.size();
  if (!ds.aerial.empty()) out << " (" << ds.aerial.front().modality_tag << ")";
  out << '\n';
  if (ds.ground.empty()) return;
  const GroundObservation& g = ds.ground.front();
  out << "scales L: " << g.image.scales.size() << '\n';
  out << "image tokens per scale N_l:";
  for (const auto& s : g.image.scales) out << ' ' << s.rows();
  out << "\nlidar tokens per scale N_l:";
  for (const auto& s : g.lidar.scales) out << ' ' << s.rows();
  out << "\nraw dim D_raw: " << g.image.raw_dim() << '\n';
  if (!ds.aerial.empty()) {
    out << "aerial tokens: " << ds.aerial.front().tokens.last_scale().rows() << '\n';
  }
}

void InspectCheckpoint(const MagtFile& file, std::ostream& out) {
  out << "model: " << file.meta["model"].dump() << '\n';
  out << "step: " << file.meta.value("step", std::uint64_t{0}) << '\n';
  out << "parameters: " << file.entries.size() << '\n';
  for (const MagtEntry& e : file.entries) {
    const DenseMatrix& v = e.tensors.at(0).data;
    out << "  " << e.id << ' ' << v.ShapeString() << " norm "
        << Fmt(std::sqrt(FrobeniusNormSquared(v))) << '\n';
  }
}

void InspectDescriptors(const DescriptorDatabase& db, std::ostream& out) {
  double lo = INFINITY, hi = 0;
  for (const auto& e : db.entries) {
    double sq = 0;
    for (Scalar v : e.descriptor.values) sq += double(v) * double(v);
    const double n = std::sqrt(sq);
    lo = std::min(lo, n);
    hi = std::max(hi, n);
  }
  out << "descriptors: " << db.size() << " of dim "
      << db.entries.front().descriptor.dim() << " (" << db.modality_tag << ")\n";
  out << "norm range: [" << Fmt(lo) << ", " << Fmt(hi) << "]\n";
}

}  // namespace

int CmdInspect(const std::filesystem::path& path,
               const std::filesystem::path& checkpoint,
               const std::string& heatmap_id,
               const std::filesystem::path& out_path, ModalityMask mask,
               std::ostream& out) {
  if (path.empty()) throw ConfigError("inspect needs a file");
  if (!heatmap_id.empty()) {
    if (checkpoint.empty()) throw ConfigError("--heatmap needs --checkpoint");
    if (out_path.empty()) throw ConfigError("--heatmap needs --out");
    Model model = LoadCheckpoint(checkpoint);
    const TokenDataset ds = LoadTokenFile(path);
    CheckDatasetFits(model.config(), ds);
    for (const auto& g : ds.ground) {
      if (g.id() == heatmap_id) {
        const std::size_t rows = DumpAssignmentHeatmap(model, g, out_path, mask);
        out << "wrote " << rows << " token rows for " << heatmap_id << " to "
            << out_path.string() << '\n';
        return kExitOk;
      }
    }
    for (const auto& a : ds.aerial) {
      if (a.id() == heatmap_id) {
        const std::size_t rows = DumpAssignmentHeatmap(model, a, out_path);
        out << "wrote " << rows << " token rows for " << heatmap_id << " to "
            << out_path.string() << '\n';
        return kExitOk;
      }
    }
    throw ConfigError("unknown id '" + heatmap_id + "'");
  }

  const MagtFile file = ReadMagt(path);
  out << "file: " << path.string() << '\n';
  if (file.meta.is_object() && file.meta.contains("model")) {
    InspectCheckpoint(file, out);
  } else if (!file.entries.empty() && file.entries.front().kind == "descriptor") {
    InspectDescriptors(ReadDescriptorFile(path), out);
  } else {
    InspectDataset(LoadTokenFile(path), out);
  }
  return kExitOk;
}

int ExitCodeFor(const std::exception& e, std::ostream& err) {
  err << "error: " << e.what() << '\n';
  if (dynamic_cast<const DivergenceError*>(&e)) return kExitDivergence;
  if (dynamic_cast<const ConfigError*>(&e) ||
      dynamic_cast<const ValidationError*>(&e) ||
      dynamic_cast<const DimensionError*>(&e) ||
      dynamic_cast<const ContractError*>(&e) ||
      dynamic_cast<const DegenerateInputError*>(&e) ||
      dynamic_cast<const FormatError*>(&e)) {
    return kExitUsage;
  }
  return kExitFailure;
}

}  // namespace magvlaq::cli
