/* Copyright 2026 The APT Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "apt/dataio.hpp"
#include "apt/evaluator.hpp"
#include "apt/proposals.hpp"
#include "apt/synth.hpp"
#include "apt/trainer.hpp"

namespace apt {

using std::filesystem::path;

// Exit codes of the command functions.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInput = 2;  // malformed input or bad arguments

struct LinkSettings {
  OverlapMetric metric = OverlapMetric::kIoM;
  double threshold = 0.5;
};

// Everything `train` and `ablate` use. Defaults, then the config file, then
// flags.
struct RunSettings {
  TrainConfig train;
  LinkSettings link;
  DescriptionMode description = DescriptionMode::kConcat;
};

// Optional overrides collected from flags.
struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> learning_rate;
  std::optional<double> momentum;
  std::optional<double> weight_decay;
  std::optional<double> tau;
  std::optional<std::string> fusion;
  std::optional<std::string> tuning;
  std::optional<bool> share_weights;
  std::optional<std::size_t> apt_layers;
  std::optional<std::size_t> reduction;
  std::optional<bool> use_ocr;
  std::optional<bool> use_vision;
  std::optional<std::string> link_metric;
  std::optional<double> link_threshold;
  std::optional<std::string> description;
};

// Config file: one JSON object whose keys mirror RunOverrides
// ("learning_rate", "tau", "fusion", "share_weights", "link_metric", ...).
// Unknown keys and wrong types throw std::invalid_argument.
RunOverrides parse_run_config(const std::string& text);
RunOverrides read_run_config(const path& file);
void apply(const RunOverrides& o, RunSettings& settings);
RunSettings resolve_settings(const std::optional<path>& config_file,
                             const RunOverrides& flags);

// "key value" lines for every effective setting.
std::string describe(const RunSettings& settings);

// Training/validation proposals restricted to base categories when any
// category is novel; `prompts` holds the matching base prompts.
struct PreparedData {
  CategorySet categories;
  std::vector<std::size_t> train_categories;  // indices into categories
  CategoryPrompts prompts;                    // of train_categories
  ProposalSet train;
  ProposalSet val;  // empty when no validation screens
};

// Links unlinked screens, then gathers embeddings. Throws MissingKeysError
// listing the missing keys of both splits.
PreparedData prepare_data(std::vector<ScreenAnnotation> train_screens,
                          std::vector<ScreenAnnotation> val_screens,
                          const EmbeddingStore& store, const CategorySet& categories,
                          const RunSettings& settings);

PreparedData prepare_synthetic(const SynthConfig& cfg, const RunSettings& settings);

// Line-oriented report: effective settings, one "epoch <k> loss <v>" line per
// epoch, then val_accuracy and steps. Wall time is left out so that equal
// runs give equal files.
std::string format_train_report(const RunSettings& settings, const TrainReport& report);

struct LinkOptions {
  path annotations;
  path out;
  std::string metric = "iom";
  double threshold = 0.5;
};
int cmd_link(const LinkOptions& opt, std::ostream& out, std::ostream& err);

struct TrainOptions {
  path annotations;
  path embeddings;
  path categories;
  std::optional<path> val_annotations;
  std::optional<path> config;
  RunOverrides overrides;
  path checkpoint_out;
  std::optional<path> report_out;
};
int cmd_train(const TrainOptions& opt, std::ostream& out, std::ostream& err);

struct EvalOptions {
  path checkpoint;
  path annotations;
  path embeddings;
  path categories;
  std::string split = "all";
  double iou_threshold = 0.5;
  bool averaged = false;  // AP averaged over IoU 0.50:0.05:0.95
  std::optional<path> detections_out;
  LinkSettings link;
  std::string description = "concat";
};
int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream& err);

struct MapOptions {
  path detections;
  path annotations;
  path categories;
  std::string split = "all";
  double iou_threshold = 0.5;
  bool averaged = false;
};
int cmd_map(const MapOptions& opt, std::ostream& out, std::ostream& err);

struct SynthOptions {
  SynthConfig config;
  path out_dir;
};
// Writes train.jsonl, val.jsonl, embeddings.apte and categories.txt.
int cmd_synth(const SynthOptions& opt, std::ostream& out, std::ostream& err);

// Ablation axes and the values each one enumerates.
//   fusion: sum, multiply, attention
//   tuning: the four tuning modes
//   weights: shared, individual
//   layers: 2, 3
//   components: full, w/o o, w/o v, baseline
struct AblationRow {
  std::string fusion;
  std::string tuning;
  std::string weights;
  std::size_t layers = 2;
  std::string components;
  double val_accuracy = 0.0;
  double final_loss = 0.0;
};

std::vector<std::string> parse_axes(const std::string& csv);
// Cartesian product over `axes`; other settings stay as in `settings`.
std::vector<AblationRow> run_ablation(const PreparedData& data,
                                      const RunSettings& settings,
                                      const std::vector<std::string>& axes);
std::string format_ablation(const std::vector<AblationRow>& rows);

struct AblateOptions {
  std::string axes = "fusion,tuning,weights,layers,components";
  // All four or none; none uses the built-in synthetic fixture.
  std::optional<path> annotations;
  std::optional<path> val_annotations;
  std::optional<path> embeddings;
  std::optional<path> categories;
  std::optional<path> config;
  RunOverrides overrides;
  SynthConfig fixture;
};
int cmd_ablate(const AblateOptions& opt, std::ostream& out, std::ostream& err);

}  // namespace apt
