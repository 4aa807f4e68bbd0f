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


#include "magvlaq/conditioning/model.h"

#include <array>
#include <cmath>

#include "magvlaq/errors.h"
#include "magvlaq/numerics/mlp.h"
#include "magvlaq/numerics/random.h"
#include "magvlaq/tokens/magt.h"

namespace magvlaq {
inline namespace MAGVLAQ_ABI {

std::string_view ToString(Aggregator a) {
  switch (a) {
    case Aggregator::kPooling:
      return "pooling";
    case Aggregator::kStaticVlaq:
      return "static-vlaq";
    case Aggregator::kOdeVlaq:
      return "ode-vlaq";
  }
  return "unknown";
}

std::string_view ToString(ModalityMask m) {
  switch (m) {
    case ModalityMask::kBoth:
      return "both";
    case ModalityMask::kImageOnly:
      return "image-only";
    case ModalityMask::kLidarOnly:
      return "lidar-only";
  }
  return "unknown";
}

Aggregator ParseAggregator(std::string_view name) {
  if (name == "pooling") return Aggregator::kPooling;
  if (name == "static-vlaq") return Aggregator::kStaticVlaq;
  if (name == "ode-vlaq") return Aggregator::kOdeVlaq;
  throw ConfigError("unknown aggregator '" + std::string(name) +
                    "' (expected pooling, static-vlaq or ode-vlaq)");
}

ModalityMask ParseModalityMask(std::string_view name) {
  if (name == "both") return ModalityMask::kBoth;
  if (name == "image-only") return ModalityMask::kImageOnly;
  if (name == "lidar-only") return ModalityMask::kLidarOnly;
  throw ConfigError("unknown modality mask '" + std::string(name) +
                    "' (expected both, image-only or lidar-only)");
}

void ModelConfig::Validate() const {
  if (raw_dim == 0 || vlaq.num_queries == 0 || vlaq.token_dim < 2 ||
      vlaq.out_dim == 0 || fusion_dim == 0 || scales == 0) {
    throw ConfigError("model dimensions must be positive (token_dim >= 2)");
  }
  if (ode_steps == 0 || !(ode_horizon > 0)) {
    throw ConfigError("ode needs steps >= 1 and horizon > 0");
  }
  if (!(alpha >= 0) || !std::isfinite(alpha)) {
    throw ConfigError("alpha must be finite and non-negative");
  }
}

nlohmann::json ToJson(const ModelConfig& c) {
  return {{"raw_dim", c.raw_dim},
          {"num_queries", c.vlaq.num_queries},
          {"token_dim", c.vlaq.token_dim},
          {"out_dim", c.vlaq.out_dim},
          {"fusion_dim", c.fusion_dim},
          {"ode_horizon", c.ode_horizon},
          {"ode_steps", c.ode_steps},
          {"scales", c.scales},
          {"alpha", c.alpha},
          {"aggregator", std::string(ToString(c.aggregator))}};
}

ModelConfig ModelConfigFromJson(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.raw_dim = j.at("raw_dim").get<std::size_t>();
    c.vlaq.num_queries = j.at("num_queries").get<std::size_t>();
    c.vlaq.token_dim = j.at("token_dim").get<std::size_t>();
    c.vlaq.out_dim = j.at("out_dim").get<std::size_t>();
    c.fusion_dim = j.at("fusion_dim").get<std::size_t>();
    c.ode_horizon = j.at("ode_horizon").get<double>();
    c.ode_steps = j.at("ode_steps").get<std::size_t>();
    c.scales = j.at("scales").get<std::size_t>();
    c.alpha = j.at("alpha").get<double>();
    c.aggregator = ParseAggregator(j.at("aggregator").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad model config: ") + e.what());
  }
  c.Validate();
  return c;
}

Var PredictQueryShift(Graph& g, ParamStore& store, Var fused,
                      const VlaqConfig& config) {
  const auto layers = BindMlp(g, store, kShiftNet);
  if (fused.cols() != layers.front().weight.rows()) {
    throw ConfigError("query shift net expects width " +
                      std::to_string(layers.front().weight.rows()) +
                      ", fused state has " + std::to_string(fused.cols()));
  }
  Var flat = MlpForward(fused, layers);
  if (flat.value().size() != config.num_queries * config.token_dim) {
    throw ConfigError("query shift net emits " +
                      std::to_string(flat.value().size()) + " values, need " +
                      std::to_string(config.num_queries * config.token_dim));
  }
  return Reshape(flat, config.num_queries, config.token_dim);
}

DenseMatrix PredictQueryShift(ParamStore& store, const FusedState& fused,
                              const VlaqConfig& config) {
  Graph g(Graph::Mode::kInference);
  Var e = g.Constant(DenseMatrix::RowVector(fused.e_fuse));
  return PredictQueryShift(g, store, e, config).value();
}

Var AdaptPrototypes(Var prototypes, Var shift, Scalar alpha) {
  if (!prototypes.value().SameShape(shift.value())) {
    throw DimensionError("adapt_prototypes: prototypes " +
                         prototypes.value().ShapeString() + " vs shift " +
                         shift.value().ShapeString());
  }
  return Add(prototypes, Scale(shift, alpha));
}

DenseMatrix AdaptPrototypes(const DenseMatrix& prototypes,
                            const DenseMatrix& shift, Scalar alpha) {
  Graph g(Graph::Mode::kInference);
  return AdaptPrototypes(g.ConstantRef(prototypes), g.ConstantRef(shift), alpha)
      .value();
}

// ---------------------------------------------------------------------------
// Model

namespace {

ParamStore InitParams(const ModelConfig& c, std::uint64_t seed) {
  ParamStore store;
  const std::size_t d = c.vlaq.token_dim;
  const std::array<std::size_t, 2> proj{c.raw_dim, d};
  InitMlp(store, kImageProjector, proj, seed);
  InitMlp(store, kLidarProjector, proj, seed);
  InitMlp(store, kAerialProjector, proj, seed);
  store.Add(kImageNormGain, DenseMatrix(1, d, Scalar{1}));
  store.Add(kImageNormBias, DenseMatrix(1, d));
  store.Add(kLidarNormGain, DenseMatrix(1, d, Scalar{1}));
  store.Add(kLidarNormBias, DenseMatrix(1, d));
  if (c.aggregator == Aggregator::kPooling) {
    Rng rng = NamedRng(seed, kPoolProjection);
    store.Add(kPoolProjection,
              RandomNormal(d, c.vlaq.out_dim,
                           1.0 / std::sqrt(static_cast<double>(d)), rng));
    return store;
  }
  InitVlaq(store, c.vlaq, seed);
  if (c.aggregator == Aggregator::kOdeVlaq) {
    InitFusion(store, c.fusion(), seed);
    const std::array<std::size_t, 3> shift{c.fusion_dim, c.fusion_dim,
                                           c.vlaq.num_queries * d};
    InitMlp(store, kShiftNet, shift, seed, /*zero_last_layer=*/true);
  }
  return store;
}

}  // namespace

Model::Model(ModelConfig config, std::uint64_t seed)
    : config_(std::move(config)) {
  config_.Validate();
  params_ = InitParams(config_, seed);
}

Model::Model(ModelConfig config, ParamStore params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.Validate();
  CheckParams();
}

void Model::CheckParams() const {
  const ParamStore expected = InitParams(config_, 0);
  for (const auto& [name, p] : expected) {
    if (!params_.contains(name)) {
      throw ConfigError("checkpoint lacks parameter '" + name + "'");
    }
    const DenseMatrix& have = params_.at(name).value;
    if (!have.SameShape(p.value)) {
      throw ConfigError("parameter '" + name + "' is " + have.ShapeString() +
                        ", model config needs " + p.value.ShapeString());
    }
  }
  if (params_.size() != expected.size()) {
    throw ConfigError("checkpoint has parameters the model config does not use");
  }
}

Var Model::Project(Graph& g, const char* projector, const DenseMatrix& tokens) {
  if (tokens.rows() == 0) {
    throw DegenerateInputError(std::string(projector) + ": no tokens");
  }
  const auto layers = BindMlp(g, params_, projector);
  return MlpForward(g.ConstantRef(tokens), layers);
}

Var Model::Features(Var tokens, Var prototypes) {
  if (config_.aggregator == Aggregator::kPooling) return MeanRows(tokens);
  return VlaqFeatures(tokens, prototypes);
}

Var Model::Head(Graph& g, std::span<const Var> features) {
  Var stacked = ConcatRows(features);
  if (config_.aggregator == Aggregator::kPooling) {
    return L2NormalizeRows(Matmul(stacked, g.Parameter(params_, kPoolProjection)));
  }
  return ProjectAndNormalize(stacked, g.Parameter(params_, kProjectionParam));
}

Model::GroundTokens Model::PrepareGround(Graph& g, const GroundObservation& obs,
                                         ModalityMask mask) {
  const bool use_image = mask != ModalityMask::kLidarOnly;
  const bool use_lidar = mask != ModalityMask::kImageOnly;
  const bool fuse = config_.aggregator == Aggregator::kOdeVlaq;
  const std::size_t levels = obs.image.scales.size();
  if (levels == 0 || obs.lidar.scales.size() != levels) {
    throw ConfigError("observation '" + obs.id() +
                      "' has mismatched or empty scale lists");
  }

  // only the last scale is needed unless the fusion cascade runs
  auto project_all = [&](const TokenSet& ts, const char* projector) {
    std::vector<Var> out(levels);
    for (std::size_t l = fuse ? 0 : levels - 1; l < levels; ++l) {
      out[l] = Project(g, projector, ts.scales[l]);
    }
    return out;
  };
  std::vector<Var> image, lidar;
  if (use_image) image = project_all(obs.image, kImageProjector);
  if (use_lidar) lidar = project_all(obs.lidar, kLidarProjector);

  std::vector<Var> parts;
  if (use_image) {
    parts.push_back(LayerNorm(image.back(), g.Parameter(params_, kImageNormGain),
                              g.Parameter(params_, kImageNormBias)));
  }
  if (use_lidar) {
    parts.push_back(LayerNorm(lidar.back(), g.Parameter(params_, kLidarNormGain),
                              g.Parameter(params_, kLidarNormBias)));
  }
  GroundTokens out;
  out.aggregation = parts.size() == 1 ? parts.front() : ConcatRows(parts);
  if (config_.aggregator == Aggregator::kPooling) return out;

  Var shared = g.Parameter(params_, kPrototypesParam);
  if (fuse) {
    Var fused = Fuse(g, params_, image, lidar, config_.fusion());
    out.shift = PredictQueryShift(g, params_, fused, config_.vlaq);
    out.prototypes =
        AdaptPrototypes(shared, out.shift, static_cast<Scalar>(config_.alpha));
  } else {
    // Pass-through node: gradients reach C through one per-observation node
    // exactly as they do through C + alpha·ΔC, so alpha = 0 reproduces this
    // path bit for bit.
    out.prototypes = AddScalar(shared, Scalar{0});
  }
  return out;
}

GroundForward Model::Ground(Graph& g,
                            std::span<const GroundObservation* const> batch,
                            ModalityMask mask) {
  if (batch.empty()) throw DegenerateInputError("empty ground batch");
  GroundForward out;
  std::vector<Var> features;
  features.reserve(batch.size());
  for (const GroundObservation* obs : batch) {
    GroundTokens t = PrepareGround(g, *obs, mask);
    features.push_back(Features(t.aggregation, t.prototypes));
    if (t.shift.valid()) out.shifts.push_back(t.shift);
  }
  out.descriptors = Head(g, features);
  return out;
}

Var Model::AerialTokens(Graph& g, const AerialReference& ref) {
  if (ref.tokens.scales.empty()) {
    throw DegenerateInputError("aerial reference '" + ref.id() + "' has no tokens");
  }
  return Project(g, kAerialProjector, ref.tokens.last_scale());
}

Var Model::Aerial(Graph& g, std::span<const AerialReference* const> batch) {
  if (batch.empty()) throw DegenerateInputError("empty aerial batch");
  Var shared;
  if (config_.aggregator != Aggregator::kPooling) {
    shared = g.Parameter(params_, kPrototypesParam);
  }
  std::vector<Var> features;
  features.reserve(batch.size());
  for (const AerialReference* ref : batch) {
    features.push_back(Features(AerialTokens(g, *ref), shared));
  }
  return Head(g, features);
}

Var Model::SingleModality(Graph& g,
                          std::span<const GroundObservation* const> batch,
                          ModalityMask mask) {
  if (mask == ModalityMask::kBoth) {
    throw ContractError("single-modality descriptors need image-only or lidar-only");
  }
  if (batch.empty()) throw DegenerateInputError("empty ground batch");
  const bool image = mask == ModalityMask::kImageOnly;
  Var shared;
  if (config_.aggregator != Aggregator::kPooling) {
    shared = g.Parameter(params_, kPrototypesParam);
  }
  std::vector<Var> features;
  features.reserve(batch.size());
  for (const GroundObservation* obs : batch) {
    const TokenSet& ts = image ? obs->image : obs->lidar;
    if (ts.scales.empty()) {
      throw DegenerateInputError("observation '" + obs->id() + "' has no tokens");
    }
    Var projected =
        Project(g, image ? kImageProjector : kLidarProjector, ts.last_scale());
    Var normed = LayerNorm(
        projected, g.Parameter(params_, image ? kImageNormGain : kLidarNormGain),
        g.Parameter(params_, image ? kImageNormBias : kLidarNormBias));
    features.push_back(Features(normed, shared));
  }
  return Head(g, features);
}

namespace {

Descriptor RowDescriptor(Var rows, Branch branch) {
  auto values = rows.value().row(0);
  return {std::vector<Scalar>(values.begin(), values.end()), branch};
}

}  // namespace

Descriptor Model::GroundDescriptor(const GroundObservation& obs,
                                   ModalityMask mask) {
  Graph g(Graph::Mode::kInference);
  const GroundObservation* batch[] = {&obs};
  return RowDescriptor(Ground(g, batch, mask).descriptors, Branch::kGround);
}

Descriptor Model::AerialDescriptor(const AerialReference& ref) {
  Graph g(Graph::Mode::kInference);
  const AerialReference* batch[] = {&ref};
  return RowDescriptor(Aerial(g, batch), Branch::kAerial);
}

DenseMatrix Model::QueryShift(const GroundObservation& obs, ModalityMask mask) {
  if (config_.aggregator != Aggregator::kOdeVlaq) {
    return DenseMatrix(config_.vlaq.num_queries, config_.vlaq.token_dim);
  }
  Graph g(Graph::Mode::kInference);
  return PrepareGround(g, obs, mask).shift.value();
}

DenseMatrix Model::GroundAssignment(const GroundObservation& obs,
                                    ModalityMask mask) {
  if (config_.aggregator == Aggregator::kPooling) {
    throw ConfigError("the pooling aggregator has no assignment weights");
  }
  Graph g(Graph::Mode::kInference);
  GroundTokens t = PrepareGround(g, obs, mask);
  return AssignmentWeights(t.aggregation, t.prototypes).value();
}

DenseMatrix Model::AerialAssignment(const AerialReference& ref) {
  if (config_.aggregator == Aggregator::kPooling) {
    throw ConfigError("the pooling aggregator has no assignment weights");
  }
  Graph g(Graph::Mode::kInference);
  return AssignmentWeights(AerialTokens(g, ref),
                           g.Parameter(params_, kPrototypesParam))
      .value();
}

// ---------------------------------------------------------------------------
// Checkpoints

std::uint64_t SaveCheckpoint(const Model& model,
                             const std::filesystem::path& path) {
  MagtFile file;
  for (const auto& [name, p] : model.params()) {
    MagtEntry e;
    e.id = name;
    e.kind = "params";
    e.tensors.push_back({"value", p.value});
    e.tensors.push_back({"first_moment", p.first_moment});
    e.tensors.push_back({"second_moment", p.second_moment});
    file.entries.push_back(std::move(e));
  }
  file.meta = {{"model", ToJson(model.config())},
               {"step", model.params().step()}};
  return WriteMagt(file, path);
}

Model LoadCheckpoint(const std::filesystem::path& path) {
  MagtFile file = ReadMagt(path);
  if (!file.meta.is_object() || !file.meta.contains("model")) {
    throw FormatError(path.string() + ": not a checkpoint (no model meta)");
  }
  ModelConfig config = ModelConfigFromJson(file.meta["model"]);
  ParamStore store;
  for (MagtEntry& e : file.entries) {
    if (e.kind != "params") {
      throw FormatError(path.string() + ": entry '" + e.id +
                        "' is not a parameter");
    }
    if (e.tensors.size() != 3 || e.tensors[0].name != "value") {
      throw FormatError(path.string() + ": parameter '" + e.id +
                        "' needs value/first_moment/second_moment tensors");
    }
    Parameter& p = store.Add(e.id, std::move(e.tensors[0].data));
    if (!e.tensors[1].data.SameShape(p.value) ||
        !e.tensors[2].data.SameShape(p.value)) {
      throw FormatError(path.string() + ": moment shapes of '" + e.id +
                        "' do not match its value");
    }
    p.first_moment = std::move(e.tensors[1].data);
    p.second_moment = std::move(e.tensors[2].data);
  }
  store.set_step(file.meta.value("step", std::uint64_t{0}));
  return Model(std::move(config), std::move(store));
}

}  // namespace MAGVLAQ_ABI
}  // namespace magvlaq
