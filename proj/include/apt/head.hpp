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

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "apt/matrix.hpp"
#include "apt/network.hpp"
#include "apt/rng.hpp"

namespace apt {

enum class Fusion { kSum, kMultiply, kAttention };

// Which side receives the OCR offset o and the vision offset v.
enum class Tuning {
  kPromptBoth,       // t + v + o  vs  f
  kPromptOcrVisVis,  // t + o      vs  f + v
  kPromptVisVisOcr,  // t + v      vs  f + o
  kVisBoth,          // t          vs  f + v + o
};

std::string to_string(Fusion f);
std::string to_string(Tuning t);
Fusion parse_fusion(const std::string& name);
Tuning parse_tuning(const std::string& name);

struct HeadConfig {
  Fusion fusion = Fusion::kSum;
  Tuning tuning = Tuning::kPromptBoth;
  bool share_weights = true;
  double tau = 0.01;
  // Component switches. Both off gives the frozen-prompt baseline head.
  bool use_ocr = true;
  bool use_vision = true;

  bool operator==(const HeadConfig&) const = default;
};

void validate(const HeadConfig& cfg);

// Frozen category prompt vectors t_j, one row per category.
struct CategoryPrompts {
  Matrix vectors;
  std::vector<std::string> names;

  std::size_t size() const { return vectors.rows(); }
  std::size_t dim() const { return vectors.cols(); }
  CategoryPrompts subset(std::span<const std::size_t> indices) const;
};

// Aligned per-proposal inputs. `labels` index rows of the CategoryPrompts
// the batch is scored against and may be empty at inference.
struct ProposalBatch {
  Matrix vision;  // f_i
  Matrix ocr;     // encoded OCR descriptions T(o_i)
  std::vector<std::size_t> labels;

  std::size_t size() const { return vision.rows(); }
  ProposalBatch select(std::span<const std::size_t> rows) const;
};

// Concatenation of a base vector and its offsets, mapped back to dim by one
// trained fc layer.
struct AttentionFusion {
  Matrix weight;  // dim x (parts * dim)
  std::vector<double> bias;

  bool operator==(const AttentionFusion&) const = default;
};

struct TunedPair {
  std::vector<double> prompt;  // tuned t_ji
  std::vector<double> vision;  // tuned f_i
};

// Applies the tuning/fusion rule to explicit offsets. `prompt_map` and
// `vision_map` are only read for attention fusion on a side with offsets.
TunedPair tune_with_offsets(const HeadConfig& cfg, std::span<const double> t,
                            std::span<const double> f, std::span<const double> o,
                            std::span<const double> v,
                            const AttentionFusion* prompt_map = nullptr,
                            const AttentionFusion* vision_map = nullptr);

// Frozen-prompt classifier: softmax over cos(t_j, f_i) / tau.
Matrix baseline_probabilities(const CategoryPrompts& prompts, const Matrix& vision,
                              double tau);

// Mean of -log(p[i][label_i]). Throws std::domain_error when a true-class
// probability is 0.
double cross_entropy(const Matrix& probs, std::span<const std::size_t> labels);

// Per-proposal classification head with prompt tuning. Holds one phi
// network when weights are shared and one per modality otherwise, plus the
// attention fusion maps when that fusion is selected.
class AptHead {
 public:
  AptHead() = default;
  // Without `init`, each phi starts with FinalInit::kZeroScale and the
  // batch-norm shift that makes its output the fusion identity (0 for sum
  // and attention, 1 for multiply). Attention maps start as [I | I | ...].
  // The untrained head therefore scores exactly like the baseline.
  AptHead(const HeadConfig& cfg, const NetworkShape& shape, Rng& rng,
          std::optional<NetworkInit> init = std::nullopt);

  const HeadConfig& config() const { return cfg_; }
  const NetworkShape& shape() const { return shape_; }
  std::size_t dim() const { return shape_.dim; }

  const std::vector<AptNetwork>& networks() const { return nets_; }
  std::vector<AptNetwork>& networks() { return nets_; }
  // Index into networks() of the phi applied to each modality, if used.
  std::optional<std::size_t> ocr_network_index() const;
  std::optional<std::size_t> vision_network_index() const;

  const std::optional<AttentionFusion>& prompt_fusion() const { return prompt_map_; }
  const std::optional<AttentionFusion>& vision_fusion() const { return vision_map_; }
  std::optional<AttentionFusion>& prompt_fusion() { return prompt_map_; }
  std::optional<AttentionFusion>& vision_fusion() { return vision_map_; }

  // Offsets o_i = phi(T(o_i)) and v_i = phi(f_i) for one proposal, eval mode.
  // Unused modalities give zero vectors.
  std::pair<std::vector<double>, std::vector<double>> offsets(
      std::span<const double> f, std::span<const double> ocr_embedding) const;

  // Tuned prompt and vision vectors for one (category, proposal) pair.
  TunedPair tune_pair(std::span<const double> t, std::span<const double> f,
                      std::span<const double> ocr_embedding) const;

  // n x m tuned probabilities. Throws std::domain_error on a zero-norm
  // vector inside a cosine.
  Matrix predict(const CategoryPrompts& prompts, const ProposalBatch& batch,
                 Mode mode = Mode::kEval) const;

  struct StepResult {
    double loss = 0.0;
    std::vector<NetworkTrace> traces;  // one per network, for running stats
  };

  // Mean cross-entropy of the batch; adds d(loss)/d(param) * scale into
  // `grads` (laid out like parameters()). Prompts receive no gradient.
  StepResult loss_and_gradients(const CategoryPrompts& prompts,
                                const ProposalBatch& batch, ParameterGrads& grads,
                                Mode mode = Mode::kTrain, double scale = 1.0) const;

  void update_running_statistics(const StepResult& step);

  // Networks' parameters in order, then the prompt-side and vision-side
  // attention maps (weight, bias).
  std::vector<std::span<double>> parameters();
  std::vector<std::span<const double>> parameters() const;
  ParameterGrads zero_grads() const;

  bool operator==(const AptHead&) const = default;

 private:
  struct Pass;
  Pass run(const CategoryPrompts& prompts, const ProposalBatch& batch, Mode mode,
           bool keep_traces) const;

  HeadConfig cfg_;
  NetworkShape shape_;
  std::vector<AptNetwork> nets_;
  std::optional<AttentionFusion> prompt_map_;
  std::optional<AttentionFusion> vision_map_;
};

// Which offsets land on each side for a config (after component switches).
enum class Offset { kOcr, kVision };
std::vector<Offset> prompt_side(const HeadConfig& cfg);
std::vector<Offset> vision_side(const HeadConfig& cfg);

}  // namespace apt
