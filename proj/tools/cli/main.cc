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


#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "commands.h"
#include "magvlaq/errors.h"

namespace {

using magvlaq::cli::RunConfig;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<std::string> aggregator;
  std::optional<double> alpha;
  std::optional<std::string> modality_mask;
  std::optional<std::size_t> num_places;
  std::optional<double> radius_m;
  std::optional<std::string> ks;
  std::optional<std::string> dataset;
  std::string out;
  std::string checkpoint;
  std::string heatmap;
  std::string path;
};

void AddRunFlags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON run config");
  cmd->add_option("--seed", f.seed, "Seed for data, init and sampling");
  cmd->add_option("--dataset", f.dataset, "Token file (default: synthetic)");
  cmd->add_option("--num-places", f.num_places, "Synthetic place count");
}

RunConfig Resolve(const Flags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : magvlaq::cli::LoadRunConfig(f.config);
  if (f.seed) c.seed = *f.seed;
  if (f.epochs) c.epochs = *f.epochs;
  if (f.aggregator) c.model.aggregator = magvlaq::ParseAggregator(*f.aggregator);
  if (f.alpha) c.model.alpha = *f.alpha;
  if (f.modality_mask) c.modality_mask = magvlaq::ParseModalityMask(*f.modality_mask);
  if (f.num_places) c.synth.num_places = *f.num_places;
  if (f.radius_m) c.radius_m = *f.radius_m;
  if (f.dataset) c.dataset = *f.dataset;
  if (f.ks) {
    c.ks.clear();
    std::string item;
    for (char ch : *f.ks + ",") {
      if (ch != ',') {
        item += ch;
        continue;
      }
      std::size_t used = 0;
      std::size_t k = 0;
      try {
        k = std::stoul(item, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != item.size()) {
        throw magvlaq::ConfigError("--k expects a comma list of integers, got '" +
                                   *f.ks + "'");
      }
      c.ks.push_back(k);
      item.clear();
    }
  }
  c.Validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Aerial-ground place recognition with ODE-conditioned VLAQ descriptors"};
  app.require_subcommand(1);
  Flags f;

  auto* generate = app.add_subcommand("generate", "Write a synthetic token file");
  AddRunFlags(generate, f);
  generate->add_option("--out", f.out, "Output token file")->required();

  auto* train = app.add_subcommand("train", "Train and write metrics.csv + checkpoint");
  AddRunFlags(train, f);
  train->add_option("--epochs", f.epochs, "Training epochs");
  train->add_option("--aggregator", f.aggregator, "pooling | static-vlaq | ode-vlaq");
  train->add_option("--alpha", f.alpha, "Query-shift scale");
  train->add_option("--radius-m", f.radius_m, "Correctness radius (m)");
  train->add_option("--out", f.out, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "Recall@K of the test queries");
  AddRunFlags(eval, f);
  eval->add_option("--checkpoint", f.checkpoint, "Checkpoint file")->required();
  eval->add_option("--modality-mask", f.modality_mask, "both | image-only | lidar-only");
  eval->add_option("--k", f.ks, "Comma-separated K list");
  eval->add_option("--radius-m", f.radius_m, "Correctness radius (m)");
  eval->add_option("--out", f.out, "Report path (default: stdout)");

  auto* exp = app.add_subcommand("export", "Write aerial descriptors");
  AddRunFlags(exp, f);
  exp->add_option("--checkpoint", f.checkpoint, "Checkpoint file")->required();
  exp->add_option("--out", f.out, "Descriptor file")->required();

  auto* inspect = app.add_subcommand("inspect", "Summarize a dataset, checkpoint or descriptor file");
  inspect->add_option("path", f.path, "File to inspect")->required();
  inspect->add_option("--checkpoint", f.checkpoint, "Checkpoint (for --heatmap)");
  inspect->add_option("--heatmap", f.heatmap, "Id whose assignment weights to dump");
  inspect->add_option("--modality-mask", f.modality_mask, "Ground modalities for --heatmap");
  inspect->add_option("--out", f.out, "Heatmap CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : magvlaq::cli::kExitUsage;
  }

  try {
    if (*inspect) {
      const auto mask = f.modality_mask ? magvlaq::ParseModalityMask(*f.modality_mask)
                                        : magvlaq::ModalityMask::kBoth;
      return magvlaq::cli::CmdInspect(f.path, f.checkpoint, f.heatmap, f.out, mask,
                                      std::cout);
    }
    const RunConfig config = Resolve(f);
    if (*generate) return magvlaq::cli::CmdGenerate(config, f.out, std::cout);
    if (*train) return magvlaq::cli::CmdTrain(config, f.out, std::cout, std::cerr);
    if (*eval) return magvlaq::cli::CmdEval(config, f.checkpoint, f.out, std::cout);
    if (*exp) return magvlaq::cli::CmdExport(config, f.checkpoint, f.out, std::cout);
  } catch (const std::exception& e) {
    return magvlaq::cli::ExitCodeFor(e, std::cerr);
  }
  return magvlaq::cli::kExitUsage;
}
