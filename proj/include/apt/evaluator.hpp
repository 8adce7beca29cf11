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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "apt/dataio.hpp"
#include "apt/geometry.hpp"

namespace apt {

struct DetectionRecord {
  std::string image_id;
  Box box;
  std::string category;
  double score = 0.0;

  bool operator==(const DetectionRecord&) const = default;
};

struct GroundTruthRecord {
  std::string image_id;
  Box box;
  std::string category;
};

// TP/FP flag per detection, in input order. Per category and image,
// detections are taken by descending score (ties in input order); each
// takes its best-IoU unmatched ground truth and is a TP if that IoU is at
// least `iou_threshold`.
std::vector<bool> match_detections(std::span<const DetectionRecord> dets,
                                   std::span<const GroundTruthRecord> gts,
                                   double iou_threshold);

// All-point interpolated AP of a ranked TP/FP sequence. nullopt when there
// is nothing to score (no ground truth and no detections); 0 when there is
// no ground truth but some detection.
std::optional<double> average_precision(const std::vector<bool>& ranked_tp,
                                        std::size_t num_gt);

enum class EvalSplit { kAll, kBase, kNovel };
EvalSplit parse_split(const std::string& name);
std::string to_string(EvalSplit split);

// 0.50, 0.55, ..., 0.95.
std::vector<double> averaged_iou_thresholds();

struct CategoryAp {
  std::string name;
  std::size_t num_gt = 0;
  std::size_t num_det = 0;
  std::optional<double> ap;  // mean over thresholds; nullopt when skipped
};

struct MapReport {
  EvalSplit split = EvalSplit::kAll;
  std::vector<double> iou_thresholds;
  std::vector<CategoryAp> categories;  // every category of the split
  double mean_ap = 0.0;                // over categories with a value
  std::size_t counted = 0;
};

// Per-category AP and their mean over the split. Records of other splits'
// categories are ignored; unknown category names throw
// std::invalid_argument, as do non-finite scores.
MapReport map_report(std::span<const DetectionRecord> dets,
                     std::span<const GroundTruthRecord> gts,
                     const CategorySet& categories,
                     std::span<const double> iou_thresholds, EvalSplit split);

MapReport map_report(std::span<const DetectionRecord> dets,
                     std::span<const GroundTruthRecord> gts,
                     const CategorySet& categories, double iou_threshold,
                     EvalSplit split);

// Aligned table followed by "ap\t<category>\t<value>" and "map\t<value>" lines.
std::string format_report(const MapReport& report);

std::vector<GroundTruthRecord> ground_truths(
    std::span<const ScreenAnnotation> screens);

// One JSON object per line: {"image_id", "bbox": [x1,y1,x2,y2], "category",
// "score"}. Throws ParseError.
std::vector<DetectionRecord> parse_detections_text(std::string_view text);
std::vector<DetectionRecord> read_detections(const std::filesystem::path& path);
void write_detections(std::span<const DetectionRecord> dets,
                      const std::filesystem::path& path);

}  // namespace apt
