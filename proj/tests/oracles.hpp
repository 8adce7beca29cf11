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

// Independent reference computations shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "apt/dataio.hpp"
#include "apt/evaluator.hpp"
#include "apt/geometry.hpp"
#include "apt/head.hpp"
#include "apt/rng.hpp"

namespace apt::testing {

// Counts unit cells of the integer grid covered by a box.
inline bool covers(const Box& b, int x, int y) {
  return x >= b.x1 && x + 1 <= b.x2 && y >= b.y1 && y + 1 <= b.y2;
}

struct RasterOverlap {
  double iou;
  double iom;
};

inline RasterOverlap raster_overlap(const Box& a, const Box& b) {
  const int x0 = static_cast<int>(std::min(a.x1, b.x1));
  const int y0 = static_cast<int>(std::min(a.y1, b.y1));
  const int x1 = static_cast<int>(std::max(a.x2, b.x2));
  const int y1 = static_cast<int>(std::max(a.y2, b.y2));
  long ca = 0, cb = 0, both = 0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const bool in_a = covers(a, x, y);
      const bool in_b = covers(b, x, y);
      ca += in_a;
      cb += in_b;
      both += in_a && in_b;
    }
  }
  return {static_cast<double>(both) / static_cast<double>(ca + cb - both),
          static_cast<double>(both) / static_cast<double>(std::min(ca, cb))};
}

inline Box random_int_box(Rng& rng, int extent) {
  const int x1 = static_cast<int>(rng.below(extent - 1));
  const int y1 = static_cast<int>(rng.below(extent - 1));
  const int x2 = x1 + 1 + static_cast<int>(rng.below(extent - x1 - 1));
  const int y2 = y1 + 1 + static_cast<int>(rng.below(extent - y1 - 1));
  return {double(x1), double(y1), double(x2), double(y2)};
}

// Brute-force mAP: every distinct score is tried as a cut-off, matching is
// redone from scratch for each cut-off, and the interpolated precision at a
// recall level is the best precision at any cut-off reaching it.
inline double brute_force_ap(const std::vector<DetectionRecord>& dets,
                             const std::vector<GroundTruthRecord>& gts,
                             const std::string& category, double thr) {
  std::vector<GroundTruthRecord> g;
  for (const auto& x : gts) {
    if (x.category == category) g.push_back(x);
  }
  std::vector<DetectionRecord> d;
  for (const auto& x : dets) {
    if (x.category == category) d.push_back(x);
  }
  if (g.empty()) return d.empty() ? -1.0 : 0.0;

  std::set<double, std::greater<>> cutoffs;
  for (const auto& x : d) cutoffs.insert(x.score);
  std::vector<std::pair<double, double>> points;  // recall, precision
  for (double cut : cutoffs) {
    std::vector<DetectionRecord> kept;
    for (const auto& x : d) {
      if (x.score >= cut) kept.push_back(x);
    }
    std::stable_sort(kept.begin(), kept.end(),
                     [](const auto& a, const auto& b) { return a.score > b.score; });
    std::vector<bool> used(g.size(), false);
    int tp = 0;
    for (const auto& x : kept) {
      int best = -1;
      double best_iou = -1.0;
      for (std::size_t k = 0; k < g.size(); ++k) {
        if (used[k] || g[k].image_id != x.image_id) continue;
        const double v = iou(x.box, g[k].box);
        if (v > best_iou) {
          best_iou = v;
          best = static_cast<int>(k);
        }
      }
      if (best >= 0 && best_iou >= thr) {
        used[best] = true;
        ++tp;
      }
    }
    points.emplace_back(double(tp) / double(g.size()), double(tp) / double(kept.size()));
  }
  std::set<double> recalls;
  for (const auto& p : points) recalls.insert(p.first);
  double ap = 0.0;
  double prev = 0.0;
  for (double r : recalls) {
    if (r <= 0.0) continue;
    double best = 0.0;
    for (const auto& p : points) {
      if (p.first >= r) best = std::max(best, p.second);
    }
    ap += (r - prev) * best;
    prev = r;
  }
  return ap;
}

inline double brute_force_map(const std::vector<DetectionRecord>& dets,
                              const std::vector<GroundTruthRecord>& gts,
                              const std::vector<std::string>& categories, double thr) {
  double sum = 0.0;
  int counted = 0;
  for (const auto& c : categories) {
    const double ap = brute_force_ap(dets, gts, c, thr);
    if (ap < 0) continue;
    sum += ap;
    ++counted;
  }
  return counted == 0 ? 0.0 : sum / counted;
}

// A head with every parameter moved off its identity start, so that
// gradients are generic.
inline AptHead random_head(const HeadConfig& cfg, const NetworkShape& shape, Rng& rng) {
  AptHead head(cfg, shape, rng, NetworkInit{FinalInit::kRandom, 0.3});
  for (auto* map : {&head.prompt_fusion(), &head.vision_fusion()}) {
    if (!*map) continue;
    for (double& w : (*map)->weight.values()) w += rng.uniform(-0.3, 0.3);
    for (double& b : (*map)->bias) b = rng.uniform(-0.1, 0.1);
  }
  for (auto& net : head.networks()) {
    for (auto& l : net.layers()) {
      for (double& g : l.gamma) g = rng.uniform(0.5, 1.5);
      for (double& b : l.beta) b = rng.uniform(0.1, 0.5);
    }
  }
  return head;
}

inline CategoryPrompts random_prompts(Rng& rng, std::size_t m, std::size_t d) {
  CategoryPrompts p;
  p.vectors = Matrix(m, d);
  for (double& v : p.vectors.values()) v = rng.normal();
  for (std::size_t j = 0; j < m; ++j) p.names.push_back("c" + std::to_string(j));
  return p;
}

inline ProposalBatch random_batch(Rng& rng, std::size_t n, std::size_t d, std::size_t m) {
  ProposalBatch b;
  b.vision = Matrix(n, d);
  b.ocr = Matrix(n, d);
  for (double& v : b.vision.values()) v = rng.normal();
  for (double& v : b.ocr.values()) v = rng.normal();
  for (std::size_t i = 0; i < n; ++i) b.labels.push_back(i % m);
  return b;
}

// Smallest distance of any train-mode pre-rectifier value from the kink.
inline double relu_margin(const AptHead& head, const ProposalBatch& batch) {
  const HeadConfig& cfg = head.config();
  std::vector<Matrix> inputs;
  const auto oi = head.ocr_network_index();
  const auto vi = head.vision_network_index();
  if (oi && vi && *oi == *vi) {
    const std::size_t n = batch.size();
    const std::size_t d = batch.vision.cols();
    Matrix stacked(2 * n, d);
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(batch.ocr.row(i).begin(), d, stacked.row(i).begin());
      std::copy_n(batch.vision.row(i).begin(), d, stacked.row(n + i).begin());
    }
    inputs.push_back(std::move(stacked));
  } else {
    if (cfg.use_ocr) inputs.push_back(batch.ocr);
    if (cfg.use_vision) inputs.push_back(batch.vision);
  }
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    NetworkTrace trace;
    head.networks()[k].forward(inputs[k], Mode::kTrain, &trace);
    for (const auto& layer : trace.layers) {
      for (double a : layer.activated.values()) margin = std::min(margin, std::fabs(a));
    }
  }
  return margin;
}

struct GradientCase {
  AptHead head;
  CategoryPrompts prompts;
  ProposalBatch batch;
};

// A random head and inputs where the loss is smooth: every rectifier input
// stays at least `margin` from zero and every cosine is defined. Central
// differences are meaningless across a kink, so such draws are redrawn.
inline GradientCase smooth_case(const HeadConfig& cfg, const NetworkShape& shape, std::size_t n,
                                std::size_t m, Rng& rng, double margin = 1e-2) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    GradientCase c{random_head(cfg, shape, rng), random_prompts(rng, m, shape.dim),
                   random_batch(rng, n, shape.dim, m)};
    if (relu_margin(c.head, c.batch) < margin) continue;
    try {
      c.head.predict(c.prompts, c.batch, Mode::kTrain);
    } catch (const std::domain_error&) {
      continue;
    }
    return c;
  }
  throw std::runtime_error("no smooth random case found");
}

// Largest relative error between analytic gradients and central differences
// over every parameter of the head.
inline double max_gradient_error(AptHead& head, const CategoryPrompts& prompts,
                                 const ProposalBatch& batch, double h = 1e-4) {
  ParameterGrads analytic = head.zero_grads();
  head.loss_and_gradients(prompts, batch, analytic);
  auto params = head.parameters();
  double worst = 0.0;
  for (std::size_t b = 0; b < params.size(); ++b) {
    for (std::size_t c = 0; c < params[b].size(); ++c) {
      const double old = params[b][c];
      ParameterGrads scratch = head.zero_grads();
      params[b][c] = old + h;
      const double plus = head.loss_and_gradients(prompts, batch, scratch).loss;
      params[b][c] = old - h;
      const double minus = head.loss_and_gradients(prompts, batch, scratch).loss;
      params[b][c] = old;
      const double fd = (plus - minus) / (2 * h);
      const double a = analytic[b][c];
      const double rel = std::fabs(fd - a) / std::max({std::fabs(fd), std::fabs(a), 1e-6});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

inline CategorySet two_categories() {
  return CategorySet({{"button", CategorySplit::kBase}, {"icon", CategorySplit::kNovel}});
}

// Three screens, two categories, a mix of hits, duplicates, misses and
// poorly localized boxes. Scores are distinct.
struct Fixture {
  std::vector<DetectionRecord> dets;
  std::vector<GroundTruthRecord> gts;
};

inline Fixture three_image_fixture() {
  Fixture f;
  f.gts = {
      {"s1", {0, 0, 10, 10}, "button"},   {"s1", {20, 0, 30, 10}, "button"},
      {"s1", {0, 20, 10, 30}, "icon"},    {"s2", {0, 0, 50, 50}, "button"},
      {"s2", {60, 60, 80, 80}, "icon"},   {"s2", {100, 0, 120, 20}, "icon"},
      {"s3", {5, 5, 25, 25}, "button"},
  };
  f.dets = {
      {"s1", {0, 0, 10, 10}, "button", 0.95},   // TP
      {"s1", {0, 1, 10, 11}, "button", 0.90},   // duplicate of the first: FP
      {"s1", {21, 0, 31, 10}, "button", 0.40},  // TP (IoU 9/11)
      {"s1", {0, 20, 10, 30}, "icon", 0.85},    // TP
      {"s2", {0, 0, 50, 30}, "button", 0.70},   // IoU 0.6: TP
      {"s2", {60, 60, 70, 70}, "icon", 0.80},   // IoU 0.25: FP
      {"s2", {100, 0, 120, 20}, "icon", 0.30},  // TP
      {"s2", {200, 200, 220, 220}, "button", 0.65},  // FP
      {"s3", {5, 5, 25, 25}, "icon", 0.60},     // wrong category: FP
      {"s3", {6, 6, 26, 26}, "button", 0.20},   // TP
  };
  return f;
}

}  // namespace apt::testing
