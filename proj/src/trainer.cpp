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
#include "apt/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

namespace apt {

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw std::invalid_argument("learning_rate must be finite and non-negative");
  }
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) {
    throw std::invalid_argument("momentum must lie in [0, 1)");
  }
  if (cfg.batch_size < 2) {
    throw std::invalid_argument("batch_size must be at least 2 (batch statistics)");
  }
  if (cfg.epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  validate(cfg.head);
}

double sgd_step(AptHead& head, const CategoryPrompts& prompts,
                const ProposalBatch& batch, ParameterGrads& velocity,
                double learning_rate, double momentum, double weight_decay) {
  ParameterGrads grads = head.zero_grads();
  auto step = head.loss_and_gradients(prompts, batch, grads, Mode::kTrain);
  head.update_running_statistics(step);
  auto params = head.parameters();
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& v = velocity[b];
    for (std::size_t c = 0; c < params[b].size(); ++c) {
      const double g = grads[b][c] + weight_decay * params[b][c];
      v[c] = momentum * v[c] + g;
      params[b][c] -= learning_rate * v[c];
    }
  }
  return step.loss;
}

TrainResult train(const TrainConfig& cfg, const ProposalBatch& data,
                  const CategoryPrompts& prompts, const ProposalBatch* val) {
  validate(cfg);
  if (data.labels.size() != data.size()) {
    throw std::invalid_argument("training data needs a label per proposal");
  }
  const auto start = std::chrono::steady_clock::now();
  Rng rng(cfg.seed);
  NetworkShape shape{prompts.dim(), cfg.reduction, cfg.apt_layers};
  TrainResult result{AptHead(cfg.head, shape, rng), {}};
  AptHead& head = result.head;
  ParameterGrads velocity = head.zero_grads();

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t batch_index = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double lr = cfg.learning_rate;
    if (cfg.lr_step_epochs > 0) {
      lr *= std::pow(cfg.lr_decay, static_cast<double>(epoch / cfg.lr_step_epochs));
    }
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t rows = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      if (end - begin < 2) break;
      const std::span<const std::size_t> rows_span(order.data() + begin, end - begin);
      const ProposalBatch batch = data.select(rows_span);
      double loss;
      try {
        loss = sgd_step(head, prompts, batch, velocity, lr, cfg.momentum,
                        cfg.weight_decay);
      } catch (const std::domain_error& e) {
        throw TrainingDiverged(batch_index, e.what());
      }
      if (!std::isfinite(loss)) throw TrainingDiverged(batch_index, "loss is not finite");
      loss_sum += loss * static_cast<double>(batch.size());
      rows += batch.size();
      ++batch_index;
    }
    result.report.epoch_losses.push_back(rows == 0 ? 0.0
                                                   : loss_sum / static_cast<double>(rows));
  }
  result.report.steps = batch_index;
  if (val != nullptr && val->size() > 0) {
    std::vector<std::size_t> all(prompts.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    result.report.val_accuracy = evaluate_accuracy(head, prompts, *val, all);
  }
  result.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::vector<std::pair<std::size_t, double>> classify(
    const AptHead& head, const CategoryPrompts& prompts, const ProposalBatch& data,
    std::span<const std::size_t> subset) {
  if (subset.empty()) throw std::invalid_argument("category subset is empty");
  const CategoryPrompts sub = prompts.subset(subset);
  const Matrix probs = head.predict(sub, data, Mode::kEval);
  std::vector<std::pair<std::size_t, double>> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < sub.size(); ++j) {
      if (probs(i, j) > probs(i, best)) best = j;
    }
    out.emplace_back(subset[best], probs(i, best));
  }
  return out;
}

double evaluate_accuracy(const AptHead& head, const CategoryPrompts& prompts,
                         const ProposalBatch& data,
                         std::span<const std::size_t> subset) {
  if (data.size() == 0) return 0.0;
  const auto predictions = classify(head, prompts, data, subset);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (predictions[i].first == data.labels.at(i)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace apt
