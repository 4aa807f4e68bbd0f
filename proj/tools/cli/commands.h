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
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "magvlaq/conditioning/model.h"
#include "magvlaq/retrieval/retrieval.h"
#include "magvlaq/tokens/synthetic.h"
#include "magvlaq/training/training.h"

namespace magvlaq::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDivergence = 3;

/// Everything a run needs. The JSON form is one flat object whose keys are
/// the field names below; unknown keys and wrong types are rejected.
struct RunConfig {
  std::string dataset;  // token file; empty = generate from `synth`
  SynthConfig synth;
  ModelConfig model;
  MiningThresholds thresholds;
  LossWeights weights;
  OptimizerState optimizer;  // use ~1e-6 when fine-tuning pretrained encoders
  std::size_t batch_size = 16;
  std::size_t epochs = 40;
  std::uint64_t seed = 7;
  ModalityMask modality_mask = ModalityMask::kBoth;
  double radius_m = 25.0;
  std::vector<std::size_t> ks{1, 5, 10};

  TrainConfig train() const;
  void Validate() const;
};

/// Applies the keys of `j` on top of `config`. ConfigError on unknown keys,
/// wrong types or invalid values, in which case `config` is left unchanged.
void ApplyJson(RunConfig& config, const nlohmann::json& j);
RunConfig LoadRunConfig(const std::filesystem::path& path);
nlohmann::json ToJson(const RunConfig& config);

/// The configured token file, or the synthetic dataset for (synth, seed).
TokenDataset ResolveDataset(const RunConfig& config);

/// Model config with raw_dim and scales taken from the dataset.
ModelConfig ModelConfigFor(const RunConfig& config, const TokenDataset& dataset);

/// Recall of the given split's ground queries against all aerials.
EvalReport Evaluate(Model& model, const TokenDataset& dataset,
                    ModalityMask mask, std::span<const std::size_t> ks,
                    double radius_m, Split split = Split::kTest);

struct EpochRow {
  EpochMetrics metrics;  // epoch numbered from 1
  double recall1 = 0;
  double recall5 = 0;
  double recall10 = 0;
};

inline constexpr const char* kMetricsHeader =
    "epoch,l_tri,l_aux,l_q,total,recall1,recall5,recall10,seconds";
/// One CSV line (no newline), 9 significant digits.
std::string FormatMetricsRow(const EpochRow& row);

/// Runs config.epochs epochs, evaluating the test split after each one.
/// DivergenceError propagates with the model at its last finite state.
std::vector<EpochRow> TrainModel(
    Model& model, const TokenDataset& dataset, const RunConfig& config,
    const std::function<void(const EpochRow&)>& on_epoch = {});

/// Descriptor export: one entry per aerial with tensor "descriptor" (1×dim).
std::uint64_t WriteDescriptorFile(const DescriptorDatabase& db,
                                  const std::filesystem::path& path);
DescriptorDatabase ReadDescriptorFile(const std::filesystem::path& path);

// Subcommands. Each returns an exit code and reports on `out` / `err`.
int CmdGenerate(const RunConfig& config, const std::filesystem::path& out_path,
                std::ostream& out);
/// Writes <out_dir>/metrics.csv and <out_dir>/checkpoint.magt.
int CmdTrain(const RunConfig& config, const std::filesystem::path& out_dir,
             std::ostream& out, std::ostream& err);
/// Prints the EvalReport JSON, or writes it to `out_path` when non-empty.
int CmdEval(const RunConfig& config, const std::filesystem::path& checkpoint,
            const std::filesystem::path& out_path, std::ostream& out);
int CmdExport(const RunConfig& config, const std::filesystem::path& checkpoint,
              const std::filesystem::path& out_path, std::ostream& out);
/// Summarizes a dataset or checkpoint file. With `heatmap_id`, `path` must
/// be a dataset, `checkpoint` is required and the CSV goes to `out_path`.
int CmdInspect(const std::filesystem::path& path,
               const std::filesystem::path& checkpoint,
               const std::string& heatmap_id,
               const std::filesystem::path& out_path, ModalityMask mask,
               std::ostream& out);

/// Maps the library's exceptions onto exit codes, printing the message.
int ExitCodeFor(const std::exception& e, std::ostream& err);

}  // namespace magvlaq::cli
