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
#include "doctest.h"

#include <cstring>
#include <numeric>

#include "apt/cli.hpp"
#include "apt/trainer.hpp"
#include "oracles.hpp"

using namespace apt;
using namespace apt::testing;

namespace {

std::vector<std::vector<double>> snapshot(const AptHead& head) {
  std::vector<std::vector<double>> out;
  for (auto p : head.parameters()) out.emplace_back(p.begin(), p.end());
  return out;
}

const PreparedData& fixture() {
  static const PreparedData data = prepare_synthetic(SynthConfig{}, RunSettings{});
  return data;
}

TrainConfig fixture_config() {
  TrainConfig cfg;
  cfg.seed = 7;
  return cfg;
}

}  // namespace

TEST_CASE("defaults") {
  const TrainConfig cfg;
  CHECK(cfg.learning_rate == 0.002);
  CHECK(cfg.momentum == 0.9);
  CHECK(cfg.batch_size == 64);
  CHECK(cfg.epochs == 12);
  CHECK(cfg.weight_decay == 0.0);
  CHECK(cfg.head.tau == 0.01);
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  cfg.batch_size = 1;
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.epochs = 0;
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.learning_rate = -1;
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.momentum = 1.0;
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
}

TEST_CASE("zero learning rate keeps the weights") {
  Rng rng(1);
  const auto prompts = random_prompts(rng, 3, 16);
  const auto data = random_batch(rng, 40, 16, 3);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.seed = 3;
  cfg.reduction = 4;
  const TrainResult r = train(cfg, data, prompts);
  Rng init_rng(3);
  const AptHead initial(cfg.head, NetworkShape{16, 4, 2}, init_rng);
  CHECK(snapshot(r.head) == snapshot(initial));
}

TEST_CASE("plain SGD step is p -= lr * grad") {
  Rng rng(2);
  AptHead head = random_head(HeadConfig{}, NetworkShape{8, 4, 2}, rng);
  const auto prompts = random_prompts(rng, 3, 8);
  const auto batch = random_batch(rng, 6, 8, 3);
  ParameterGrads grads = head.zero_grads();
  head.loss_and_gradients(prompts, batch, grads);
  const auto before = snapshot(head);
  ParameterGrads velocity = head.zero_grads();
  const double eps = 1e-3;
  sgd_step(head, prompts, batch, velocity, eps, 0.0, 0.0);
  const auto after = snapshot(head);
  for (std::size_t b = 0; b < before.size(); ++b) {
    for (std::size_t c = 0; c < before[b].size(); ++c) {
      CHECK(after[b][c] == before[b][c] - eps * grads[b][c]);
    }
  }
}

TEST_CASE("momentum accumulates velocity") {
  Rng rng(3);
  AptHead head = random_head(HeadConfig{}, NetworkShape{8, 4, 2}, rng);
  const auto prompts = random_prompts(rng, 3, 8);
  const auto batch = random_batch(rng, 6, 8, 3);
  ParameterGrads velocity = head.zero_grads();
  velocity[0][0] = 2.0;
  ParameterGrads grads = head.zero_grads();
  head.loss_and_gradients(prompts, batch, grads);
  const double p0 = head.parameters()[0][0];
  sgd_step(head, prompts, batch, velocity, 0.1, 0.9, 0.0);
  CHECK(velocity[0][0] == 0.9 * 2.0 + grads[0][0]);
  CHECK(head.parameters()[0][0] == p0 - 0.1 * velocity[0][0]);
}

TEST_CASE("training is deterministic") {
  Rng rng(4);
  const auto prompts = random_prompts(rng, 4, 16);
  const auto data = random_batch(rng, 50, 16, 4);
  const auto val = random_batch(rng, 20, 16, 4);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  cfg.reduction = 4;
  cfg.seed = 99;
  cfg.head.fusion = Fusion::kAttention;
  const TrainResult a = train(cfg, data, prompts, &val);
  const TrainResult b = train(cfg, data, prompts, &val);
  CHECK(a.head == b.head);
  CHECK(a.report == b.report);
  cfg.seed = 100;
  const TrainResult c = train(cfg, data, prompts, &val);
  CHECK_FALSE(c.head == a.head);
}

TEST_CASE("prompts are never written") {
  Rng rng(5);
  const auto prompts = random_prompts(rng, 4, 16);
  const auto data = random_batch(rng, 64 * 25, 16, 4);
  std::vector<double> bytes(prompts.vectors.values().begin(), prompts.vectors.values().end());
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.reduction = 4;
  const TrainResult r = train(cfg, data, prompts);
  CHECK(r.report.steps == 100);
  CHECK(std::memcmp(bytes.data(), prompts.vectors.values().data(),
                    bytes.size() * sizeof(double)) == 0);
}

TEST_CASE("short trailing batches are dropped") {
  Rng rng(6);
  const auto prompts = random_prompts(rng, 2, 8);
  const auto data = random_batch(rng, 65, 8, 2);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.reduction = 4;
  CHECK(train(cfg, data, prompts).report.steps == 3);
  const auto data66 = random_batch(rng, 66, 8, 2);
  CHECK(train(cfg, data66, prompts).report.steps == 6);
}

TEST_CASE("failures name the batch") {
  Rng rng(7);
  const auto prompts = random_prompts(rng, 2, 8);
  auto data = random_batch(rng, 8, 8, 2);
  for (std::size_t i = 0; i < 8; ++i) {
    for (double& x : data.vision.row(i)) x = 0.0;
  }
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.reduction = 4;
  try {
    train(cfg, data, prompts);
    FAIL("expected TrainingDiverged");
  } catch (const TrainingDiverged& e) {
    CHECK(e.batch() == 0);
    CHECK(std::string(e.what()).find("batch 0") != std::string::npos);
  }
}

TEST_CASE("accuracy over category subsets") {
  Rng rng(8);
  const auto prompts = random_prompts(rng, 3, 8);
  ProposalBatch data;
  data.vision = prompts.vectors;
  data.ocr = Matrix(3, 8);
  data.labels = {0, 1, 2};
  const AptHead head(HeadConfig{}, NetworkShape{8, 4, 2}, rng);
  const std::vector<std::size_t> all = {0, 1, 2};
  CHECK(evaluate_accuracy(head, prompts, data, all) == 1.0);
  const std::vector<std::size_t> only1 = {1};
  CHECK(evaluate_accuracy(head, prompts, data, only1) == doctest::Approx(1.0 / 3.0));
  const auto picks = classify(head, prompts, data, only1);
  for (const auto& [label, prob] : picks) {
    CHECK(label == 1);
    CHECK(prob == 1.0);
  }
  CHECK_THROWS_AS(classify(head, prompts, data, {}), std::invalid_argument);
}

TEST_CASE("fixture training lowers the loss and beats the frozen prompts") {
  const PreparedData& data = fixture();
  const TrainResult apt = train(fixture_config(), data.train.batch, data.prompts, &data.val.batch);
  REQUIRE(apt.report.epoch_losses.size() == 12);
  CHECK(apt.report.epoch_losses.back() < apt.report.epoch_losses.front());

  TrainConfig base_cfg = fixture_config();
  base_cfg.head.use_ocr = false;
  base_cfg.head.use_vision = false;
  const TrainResult base = train(base_cfg, data.train.batch, data.prompts, &data.val.batch);
  const std::vector<std::size_t> all = data.train_categories;
  CHECK(apt.report.val_accuracy > base.report.val_accuracy);
  CHECK(base.report.val_accuracy ==
        evaluate_accuracy(base.head, data.prompts, data.val.batch,
                          std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));
}
