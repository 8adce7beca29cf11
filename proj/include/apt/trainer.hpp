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

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "apt/head.hpp"

namespace apt {

struct TrainConfig {
  double learning_rate = 0.002;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::size_t batch_size = 64;
  std::size_t epochs = 12;
  std::uint64_t seed = 0;
  HeadConfig head;
  std::size_t apt_layers = 2;
  std::size_t reduction = 16;
  // Multiply the learning rate by lr_decay every lr_step_epochs epochs.
  // 0 keeps it constant.
  std::size_t lr_step_epochs = 0;
  double lr_decay = 0.1;
};

void validate(const TrainConfig& cfg);

struct TrainReport {
  std::vector<double> epoch_losses;
  double val_accuracy = 0.0;
  std::size_t steps = 0;
  double wall_seconds = 0.0;  // not part of equality or the written report

  bool operator==(const TrainReport& o) const {
    return epoch_losses == o.epoch_losses && val_accuracy == o.val_accuracy &&
           steps == o.steps;
  }
};

// Non-finite loss during training; carries the global batch index.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t batch, const std::string& what)
      : std::runtime_error("non-finite loss at batch " + std::to_string(batch) +
                           ": " + what),
        batch_(batch) {}
  std::size_t batch() const { return batch_; }

 private:
  std::size_t batch_;
};

struct TrainResult {
  AptHead head;
  TrainReport report;
};

// Mini-batch SGD with momentum on the mean cross-entropy of the tuned head.
// Prompts are read only. Each epoch draws a fresh permutation from the
// seeded generator; a trailing batch of fewer than 2 rows is dropped.
// `val` (optional) is scored in eval mode over all prompts after training.
TrainResult train(const TrainConfig& cfg, const ProposalBatch& data,
                  const CategoryPrompts& prompts,
                  const ProposalBatch* val = nullptr);

// One SGD step on one batch. Returns the batch loss. `velocity` must match
// head.parameters() in layout (see AptHead::zero_grads()).
double sgd_step(AptHead& head, const CategoryPrompts& prompts,
                const ProposalBatch& batch, ParameterGrads& velocity,
                double learning_rate, double momentum, double weight_decay);

// Fraction of rows whose argmax over `subset` (indices into `prompts`)
// equals the label. Ties go to the earlier category in `subset`.
double evaluate_accuracy(const AptHead& head, const CategoryPrompts& prompts,
                         const ProposalBatch& data,
                         std::span<const std::size_t> subset);

// Argmax category (index into `prompts`) and its probability per row,
// scoring only the categories in `subset`.
std::vector<std::pair<std::size_t, double>> classify(
    const AptHead& head, const CategoryPrompts& prompts, const ProposalBatch& data,
    std::span<const std::size_t> subset);

}  // namespace apt
