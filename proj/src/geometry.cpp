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
#include "apt/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

namespace apt {

bool is_valid(const Box& b) {
  return std::isfinite(b.x1) && std::isfinite(b.y1) && std::isfinite(b.x2) &&
         std::isfinite(b.y2) && b.x2 > b.x1 && b.y2 > b.y1;
}

void validate(const Box& b) {
  if (!std::isfinite(b.x1) || !std::isfinite(b.y1) || !std::isfinite(b.x2) ||
      !std::isfinite(b.y2)) {
    throw std::invalid_argument("non-finite box coordinate");
  }
  if (!(b.x2 > b.x1) || !(b.y2 > b.y1)) {
    throw std::invalid_argument("zero-area box");
  }
}

double area(const Box& b) { return (b.x2 - b.x1) * (b.y2 - b.y1); }

double intersection_area(const Box& a, const Box& b) {
  const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

double iou(const Box& a, const Box& b) {
  const double inter = intersection_area(a, b);
  if (inter == 0.0) return 0.0;
  return inter / (area(a) + area(b) - inter);
}

double iom(const Box& a, const Box& b) {
  const double inter = intersection_area(a, b);
  if (inter == 0.0) return 0.0;
  return inter / std::min(area(a), area(b));
}

OverlapMetric parse_overlap_metric(const std::string& name) {
  if (name == "iou") return OverlapMetric::kIoU;
  if (name == "iom") return OverlapMetric::kIoM;
  throw std::invalid_argument("unknown overlap metric '" + name +
                              "' (expected iou or iom)");
}

std::string to_string(OverlapMetric metric) {
  return metric == OverlapMetric::kIoU ? "iou" : "iom";
}

double overlap(OverlapMetric metric, const Box& a, const Box& b) {
  return metric == OverlapMetric::kIoU ? iou(a, b) : iom(a, b);
}

LinkAssignment link_ocr(std::span<const ElementAnnotation> elements,
                        std::span<const OcrItem> ocr, double threshold,
                        OverlapMetric metric) {
  if (!std::isfinite(threshold)) {
    throw std::invalid_argument("link threshold must be finite");
  }

  struct Candidate {
    double score;
    std::size_t element;
    std::size_t item;
  };
  std::vector<Candidate> candidates;
  for (std::size_t e = 0; e < elements.size(); ++e) {
    for (std::size_t o = 0; o < ocr.size(); ++o) {
      const double s = overlap(metric, elements[e].box, ocr[o].box);
      if (s > threshold) candidates.push_back({s, e, o});
    }
  }
  // Ties resolve on the annotation indices, not on list positions, so the
  // result does not depend on how the input lists were permuted.
  std::sort(candidates.begin(), candidates.end(),
            [&](const Candidate& a, const Candidate& b) {
              if (a.score != b.score) return a.score > b.score;
              if (elements[a.element].index != elements[b.element].index)
                return elements[a.element].index < elements[b.element].index;
              return ocr[a.item].index < ocr[b.item].index;
            });

  std::vector<bool> taken(ocr.size(), false);
  std::vector<std::vector<std::size_t>> positions(elements.size());
  for (const Candidate& c : candidates) {
    if (taken[c.item]) continue;
    taken[c.item] = true;
    positions[c.element].push_back(c.item);
  }

  LinkAssignment out;
  out.matched.resize(elements.size());
  out.descriptions.resize(elements.size());
  for (std::size_t e = 0; e < elements.size(); ++e) {
    auto& items = positions[e];
    std::sort(items.begin(), items.end(), [&](std::size_t a, std::size_t b) {
      return std::tie(ocr[a].box.y1, ocr[a].box.x1, ocr[a].index) <
             std::tie(ocr[b].box.y1, ocr[b].box.x1, ocr[b].index);
    });
    std::string text;
    for (std::size_t k = 0; k < items.size(); ++k) {
      if (k > 0) text += ' ';
      text += ocr[items[k]].text;
      out.matched[e].push_back(ocr[items[k]].index);
    }
    out.descriptions[e] = std::move(text);
  }
  return out;
}

}  // namespace apt
