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
// Acceptance checks. One PASS/FAIL line per criterion; exits nonzero when
// any criterion fails. Tolerances and time limits are fixed here.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <string>
#include <vector>

#include "apt/checkpoint.hpp"
#include "apt/cli.hpp"
#include "apt/network.hpp"
#include "apt/trainer.hpp"
#include "oracles.hpp"

using namespace apt;
using namespace apt::testing;

namespace {

constexpr double kGradientTolerance = 1e-4;
constexpr double kBaselineTolerance = 1e-6;
constexpr double kOverlapTolerance = 1e-9;
constexpr double kApTolerance = 1e-9;
constexpr double kMinAccuracyGain = 0.05;

struct Outcome {
  bool pass;
  std::string detail;
};

struct Criterion {
  std::string name;
  double time_limit_s;
  std::function<Outcome()> check;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome parameter_budget() {
  const std::size_t two = param_count(NetworkShape{1024, 16, 2});
  const std::size_t three = param_count(NetworkShape{1024, 16, 3});
  Rng rng(1);
  const AptNetwork net(NetworkShape{1024, 16, 2}, rng);
  const bool ok = two == 134336 && three - two == 4288 && net.param_count() == two;
  return {ok, "layers2 " + std::to_string(two) + ", layers3 adds " +
                  std::to_string(three - two)};
}

Outcome gradient_check() {
  const Fusion fusions[] = {Fusion::kSum, Fusion::kMultiply, Fusion::kAttention};
  const Tuning tunings[] = {Tuning::kPromptBoth, Tuning::kPromptOcrVisVis,
                            Tuning::kPromptVisVisOcr, Tuning::kVisBoth};
  Rng rng(20);
  double worst = 0.0;
  std::size_t configs = 0;
  for (Fusion f : fusions) {
    for (Tuning t : tunings) {
      for (bool share : {false, true}) {
        const std::size_t d = configs % 2 == 0 ? 8 : 16;
        const std::size_t n = (configs / 2) % 2 == 0 ? 4 : 8;
        const std::size_t m = (configs / 4) % 2 == 0 ? 3 : 5;
        HeadConfig cfg;
        cfg.fusion = f;
        cfg.tuning = t;
        cfg.share_weights = share;
        cfg.tau = 0.5;
        auto [head, prompts, batch] = smooth_case(cfg, NetworkShape{d, 4, 2}, n, m, rng);
        worst = std::max(worst, max_gradient_error(head, prompts, batch));
        ++configs;
      }
    }
  }
  return {configs >= 20 && worst < kGradientTolerance,
          std::to_string(configs) + " configurations, max relative error " +
              fmt("%.3g", worst)};
}

Outcome baseline_equivalence() {
  Rng rng(21);
  double worst = 0.0;
  for (Tuning t : {Tuning::kPromptBoth, Tuning::kPromptOcrVisVis, Tuning::kPromptVisVisOcr,
                   Tuning::kVisBoth}) {
    HeadConfig cfg;
    cfg.fusion = Fusion::kSum;
    cfg.tuning = t;
    const AptHead head(cfg, NetworkShape{16, 4, 2}, rng);
    const auto prompts = random_prompts(rng, 5, 16);
    const auto batch = random_batch(rng, 9, 16, 5);
    const Matrix base = baseline_probabilities(prompts, batch.vision, cfg.tau);
    for (Mode mode : {Mode::kTrain, Mode::kEval}) {
      const Matrix p = head.predict(prompts, batch, mode);
      for (std::size_t k = 0; k < p.size(); ++k) {
        worst = std::max(worst, std::fabs(p.values()[k] - base.values()[k]));
      }
    }
  }
  return {worst <= kBaselineTolerance, "4 tunings, max deviation " + fmt("%.3g", worst)};
}

Outcome prompt_freezing() {
  Rng rng(22);
  const auto prompts = random_prompts(rng, 4, 16);
  const auto data = random_batch(rng, 64 * 25, 16, 4);
  const std::vector<double> before(prompts.vectors.values().begin(),
                                   prompts.vectors.values().end());
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.reduction = 4;
  const TrainResult r = train(cfg, data, prompts);
  const bool same = std::memcmp(before.data(), prompts.vectors.values().data(),
                                before.size() * sizeof(double)) == 0;
  return {r.report.steps == 100 && same,
          std::to_string(r.report.steps) + " steps, prompts " + (same ? "unchanged" : "changed")};
}

Outcome overlap_oracle() {
  Rng rng(23);
  double worst = 0.0;
  bool ordered = true;
  for (int k = 0; k < 1000; ++k) {
    const Box a = random_int_box(rng, 24);
    const Box b = random_int_box(rng, 24);
    const RasterOverlap o = raster_overlap(a, b);
    worst = std::max({worst, std::fabs(iou(a, b) - o.iou), std::fabs(iom(a, b) - o.iom)});
    ordered = ordered && iom(a, b) >= iou(a, b);
  }
  ElementAnnotation el;
  el.box = {0, 0, 10, 10};
  el.category = "button";
  OcrItem text;
  text.box = {0, 0, 5, 2};
  text.text = "Buy";
  const std::vector<ElementAnnotation> els = {el};
  const std::vector<OcrItem> ocr = {text};
  const bool by_iom = !link_ocr(els, ocr, 0.5, OverlapMetric::kIoM).matched[0].empty();
  const bool by_iou = !link_ocr(els, ocr, 0.5, OverlapMetric::kIoU).matched[0].empty();
  return {worst <= kOverlapTolerance && ordered && by_iom && !by_iou,
          "1000 pairs, max deviation " + fmt("%.3g", worst) + ", contained text links under " +
              (by_iom ? "iom" : "neither") + (by_iou ? " and iou" : " only")};
}

Outcome evaluator_oracle() {
  const Fixture f = three_image_fixture();
  const CategorySet cats = two_categories();
  const double map = map_report(f.dets, f.gts, cats, 0.5, EvalSplit::kAll).mean_ap;
  const double oracle = brute_force_map(f.dets, f.gts, {"button", "icon"}, 0.5);

  std::vector<DetectionRecord> perfect;
  for (const auto& g : f.gts) perfect.push_back({g.image_id, g.box, g.category, 0.9});
  const double perfect_map = map_report(perfect, f.gts, cats, 0.5, EvalSplit::kAll).mean_ap;

  const double hand = *average_precision({true, false, true}, 2);
  const bool ok = map == oracle && perfect_map == 1.0 &&
                  std::fabs(hand - 5.0 / 6.0) <= kApTolerance;
  return {ok, "fixture mAP " + fmt("%.17g", map) + " vs oracle " + fmt("%.17g", oracle) +
                  ", perfect " + fmt("%.17g", perfect_map) + ", hand case " + fmt("%.12f", hand)};
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

Outcome accuracy_gain() {
  const PreparedData& data = fixture();
  const auto run = [&](bool enabled) {
    TrainConfig cfg = fixture_config();
    cfg.head.use_ocr = enabled;
    cfg.head.use_vision = enabled;
    return train(cfg, data.train.batch, data.prompts, &data.val.batch).report.val_accuracy;
  };
  const double apt = run(true);
  const double base = run(false);
  const double again = run(true);
  return {apt - base >= kMinAccuracyGain && apt == again,
          "apt " + fmt("%.4f", apt) + ", baseline " + fmt("%.4f", base) + ", gain " +
              fmt("%.4f", apt - base) + (apt == again ? ", repeatable" : ", not repeatable")};
}

Outcome ablation_direction() {
  RunSettings s;
  s.train = fixture_config();
  const auto comps = run_ablation(fixture(), s, {"components"});
  const auto weights = run_ablation(fixture(), s, {"weights"});
  double full = 0, no_ocr = 0, no_vision = 0;
  for (const auto& r : comps) {
    if (r.components == "full") full = r.val_accuracy;
    if (r.components == "w/o o") no_ocr = r.val_accuracy;
    if (r.components == "w/o v") no_vision = r.val_accuracy;
  }
  const bool executed = weights.size() == 2 && std::isfinite(weights[0].final_loss) &&
                        std::isfinite(weights[1].final_loss);
  return {no_ocr < full && no_vision < full && executed,
          "full " + fmt("%.4f", full) + ", w/o o " + fmt("%.4f", no_ocr) + ", w/o v " +
              fmt("%.4f", no_vision) + "; shared " + fmt("%.4f", weights[0].val_accuracy) +
              ", individual " + fmt("%.4f", weights[1].val_accuracy) + " (reported only)"};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism() {
  SynthConfig small;
  small.n_train = 300;
  const PreparedData data = prepare_synthetic(small, RunSettings{});
  RunSettings s;
  s.train.seed = 7;
  const auto dir = std::filesystem::temp_directory_path() / "apt_acceptance";
  std::filesystem::create_directories(dir);
  std::string ckpt[2], report[2];
  for (int k = 0; k < 2; ++k) {
    const TrainResult r = train(s.train, data.train.batch, data.prompts, &data.val.batch);
    const auto file = dir / ("run" + std::to_string(k) + ".ckpt");
    save_checkpoint(r.head, file);
    ckpt[k] = slurp(file);
    report[k] = format_train_report(s, r.report);
  }
  std::filesystem::remove_all(dir);
  const bool ok = !ckpt[0].empty() && ckpt[0] == ckpt[1] && report[0] == report[1];
  return {ok, "checkpoints " + std::to_string(ckpt[0].size()) + " bytes, " +
                  (ckpt[0] == ckpt[1] ? "identical" : "different") + "; reports " +
                  (report[0] == report[1] ? "identical" : "different")};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"parameter budget", 1.0, parameter_budget},
      {"gradient correctness", 30.0, gradient_check},
      {"baseline equivalence", 10.0, baseline_equivalence},
      {"prompt freezing", 10.0, prompt_freezing},
      {"iom/iou oracle", 10.0, overlap_oracle},
      {"evaluator oracle", 10.0, evaluator_oracle},
      {"accuracy gain over frozen prompts", 120.0, accuracy_gain},
      {"ablation direction", 120.0, ablation_direction},
      {"determinism", 60.0, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool pass = o.pass && secs <= c.time_limit_s;
    failures += !pass;
    std::printf("%s %s: %s (%.2f s, limit %.0f s)\n", pass ? "PASS" : "FAIL", c.name.c_str(),
                o.detail.c_str(), secs, c.time_limit_s);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
