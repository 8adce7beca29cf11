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
#include "apt/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace apt {

using json = nlohmann::json;

std::vector<bool> match_detections(std::span<const DetectionRecord> dets,
                                   std::span<const GroundTruthRecord> gts,
                                   double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw std::invalid_argument("iou threshold must lie in (0, 1]");
  }
  using Key = std::pair<std::string, std::string>;  // image, category
  std::map<Key, std::vector<std::size_t>> gt_groups;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    gt_groups[{gts[g].image_id, gts[g].category}].push_back(g);
  }
  std::map<Key, std::vector<std::size_t>> det_groups;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    det_groups[{dets[i].image_id, dets[i].category}].push_back(i);
  }

  std::vector<bool> tp(dets.size(), false);
  for (auto& [key, order] : det_groups) {
    auto it = gt_groups.find(key);
    if (it == gt_groups.end()) continue;
    const std::vector<std::size_t>& candidates = it->second;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return dets[a].score > dets[b].score;
    });
    std::vector<bool> used(candidates.size(), false);
    for (std::size_t i : order) {
      double best = -1.0;
      std::size_t best_k = 0;
      for (std::size_t k = 0; k < candidates.size(); ++k) {
        if (used[k]) continue;
        const double v = iou(dets[i].box, gts[candidates[k]].box);
        if (v > best) {
          best = v;
          best_k = k;
        }
      }
      if (best >= iou_threshold) {
        used[best_k] = true;
        tp[i] = true;
      }
    }
  }
  return tp;
}

std::optional<double> average_precision(const std::vector<bool>& ranked_tp,
                                        std::size_t num_gt) {
  if (num_gt == 0) {
    if (ranked_tp.empty()) return std::nullopt;
    return 0.0;
  }
  const std::size_t n = ranked_tp.size();
  std::vector<double> recall(n), precision(n);
  std::size_t hits = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (ranked_tp[k]) ++hits;
    recall[k] = static_cast<double>(hits) / static_cast<double>(num_gt);
    precision[k] = static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  for (std::size_t k = n; k-- > 1;) {
    precision[k - 1] = std::max(precision[k - 1], precision[k]);
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (recall[k] > prev_recall) {
      ap += (recall[k] - prev_recall) * precision[k];
      prev_recall = recall[k];
    }
  }
  return ap;
}

EvalSplit parse_split(const std::string& name) {
  if (name == "all") return EvalSplit::kAll;
  if (name == "base") return EvalSplit::kBase;
  if (name == "novel") return EvalSplit::kNovel;
  throw std::invalid_argument("unknown split '" + name + "'");
}

std::string to_string(EvalSplit split) {
  switch (split) {
    case EvalSplit::kAll:
      return "all";
    case EvalSplit::kBase:
      return "base";
    case EvalSplit::kNovel:
      return "novel";
  }
  return "?";
}

std::vector<double> averaged_iou_thresholds() {
  std::vector<double> out;
  for (int k = 0; k < 10; ++k) out.push_back(0.5 + 0.05 * k);
  return out;
}

namespace {

bool in_split(const Category& c, EvalSplit split) {
  switch (split) {
    case EvalSplit::kAll:
      return true;
    case EvalSplit::kBase:
      return c.split == CategorySplit::kBase;
    case EvalSplit::kNovel:
      return c.split == CategorySplit::kNovel;
  }
  return false;
}

}  // namespace

MapReport map_report(std::span<const DetectionRecord> dets,
                     std::span<const GroundTruthRecord> gts,
                     const CategorySet& categories,
                     std::span<const double> iou_thresholds, EvalSplit split) {
  if (iou_thresholds.empty()) throw std::invalid_argument("no iou thresholds");
  const std::size_t m = categories.size();
  std::vector<std::vector<std::size_t>> det_rows(m);
  std::vector<std::size_t> gt_counts(m, 0);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const auto c = categories.find(dets[i].category);
    if (!c) throw std::invalid_argument("unknown category '" + dets[i].category + "'");
    if (!std::isfinite(dets[i].score)) {
      throw std::invalid_argument("non-finite detection score");
    }
    det_rows[*c].push_back(i);
  }
  for (const auto& g : gts) {
    const auto c = categories.find(g.category);
    if (!c) throw std::invalid_argument("unknown category '" + g.category + "'");
    ++gt_counts[*c];
  }

  std::vector<std::vector<bool>> tp_by_threshold;
  for (double thr : iou_thresholds) {
    tp_by_threshold.push_back(match_detections(dets, gts, thr));
  }

  MapReport report;
  report.split = split;
  report.iou_thresholds.assign(iou_thresholds.begin(), iou_thresholds.end());
  double sum = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    if (!in_split(categories[c], split)) continue;
    CategoryAp row;
    row.name = categories[c].name;
    row.num_gt = gt_counts[c];
    row.num_det = det_rows[c].size();
    std::vector<std::size_t> order = det_rows[c];
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return dets[a].score > dets[b].score;
    });
    if (!order.empty() || row.num_gt > 0) {
      double total = 0.0;
      for (const auto& tp : tp_by_threshold) {
        std::vector<bool> ranked;
        for (std::size_t i : order) ranked.push_back(tp[i]);
        total += *average_precision(ranked, row.num_gt);
      }
      row.ap = total / static_cast<double>(tp_by_threshold.size());
      sum += *row.ap;
      ++report.counted;
    }
    report.categories.push_back(std::move(row));
  }
  if (report.counted > 0) report.mean_ap = sum / static_cast<double>(report.counted);
  return report;
}

MapReport map_report(std::span<const DetectionRecord> dets,
                     std::span<const GroundTruthRecord> gts,
                     const CategorySet& categories, double iou_threshold,
                     EvalSplit split) {
  const double thr[] = {iou_threshold};
  return map_report(dets, gts, categories, thr, split);
}

std::string format_report(const MapReport& report) {
  std::size_t width = 8;
  for (const auto& c : report.categories) width = std::max(width, c.name.size());
  std::ostringstream out;
  char buf[128];
  out << "split " << to_string(report.split) << ", iou";
  if (report.iou_thresholds.size() == 1) {
    std::snprintf(buf, sizeof buf, " %.2f", report.iou_thresholds[0]);
    out << buf;
  } else {
    std::snprintf(buf, sizeof buf, " %.2f:%.2f (%zu thresholds)",
                  report.iou_thresholds.front(), report.iou_thresholds.back(),
                  report.iou_thresholds.size());
    out << buf;
  }
  out << '\n';
  out << std::string(width - 8, ' ') << "category      gt     det      AP\n";
  for (const auto& c : report.categories) {
    out << std::string(width - c.name.size(), ' ') << c.name;
    if (c.ap) {
      std::snprintf(buf, sizeof buf, " %7zu %7zu %7.4f\n", c.num_gt, c.num_det, *c.ap);
    } else {
      std::snprintf(buf, sizeof buf, " %7zu %7zu       -\n", c.num_gt, c.num_det);
    }
    out << buf;
  }
  std::snprintf(buf, sizeof buf, " %23.4f\n", report.mean_ap);
  out << std::string(width - 3, ' ') << "mAP" << buf;
  for (const auto& c : report.categories) {
    if (!c.ap) continue;
    std::snprintf(buf, sizeof buf, "%.17g", *c.ap);
    out << "ap\t" << c.name << '\t' << buf << '\n';
  }
  std::snprintf(buf, sizeof buf, "%.17g", report.mean_ap);
  out << "map\t" << buf << '\n';
  return out.str();
}

std::vector<GroundTruthRecord> ground_truths(
    std::span<const ScreenAnnotation> screens) {
  std::vector<GroundTruthRecord> out;
  for (const auto& s : screens) {
    for (const auto& e : s.elements) out.push_back({s.image_id, e.box, e.category});
  }
  return out;
}

std::vector<DetectionRecord> parse_detections_text(std::string_view text) {
  std::vector<DetectionRecord> out;
  std::size_t line_number = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(start, end - start);
    ++line_number;
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_number, std::string("malformed record: ") + e.what());
    }
    DetectionRecord d;
    for (const char* field : {"image_id", "category"}) {
      if (!obj.is_object() || !obj.contains(field) || !obj[field].is_string()) {
        throw ParseError(line_number, std::string("field ") + field + ": missing or not a string");
      }
    }
    d.image_id = obj["image_id"].get<std::string>();
    d.category = obj["category"].get<std::string>();
    const json& bbox = obj.value("bbox", json());
    if (!bbox.is_array() || bbox.size() != 4) {
      throw ParseError(line_number, "field bbox: expected [x1,y1,x2,y2]");
    }
    double* coords[4] = {&d.box.x1, &d.box.y1, &d.box.x2, &d.box.y2};
    for (int k = 0; k < 4; ++k) {
      if (!bbox[k].is_number()) throw ParseError(line_number, "field bbox: not a number");
      *coords[k] = bbox[k].get<double>();
    }
    try {
      validate(d.box);
    } catch (const std::invalid_argument& e) {
      throw ParseError(line_number, std::string("field bbox: ") + e.what());
    }
    if (!obj.contains("score") || !obj["score"].is_number()) {
      throw ParseError(line_number, "field score: missing or not a number");
    }
    d.score = obj["score"].get<double>();
    if (!(d.score >= 0.0 && d.score <= 1.0)) {
      throw ParseError(line_number, "field score: outside [0, 1]");
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<DetectionRecord> read_detections(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::string text{std::istreambuf_iterator<char>(in),
                         std::istreambuf_iterator<char>()};
  return parse_detections_text(text);
}

void write_detections(std::span<const DetectionRecord> dets,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  for (const auto& d : dets) {
    json obj;
    obj["image_id"] = d.image_id;
    obj["bbox"] = json::array({d.box.x1, d.box.y1, d.box.x2, d.box.y2});
    obj["category"] = d.category;
    obj["score"] = d.score;
    out << obj.dump() << '\n';
  }
}

}  // namespace apt
