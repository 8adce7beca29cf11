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
#include <span>
#include <string>
#include <vector>

namespace apt {

// Axis-aligned rectangle in pixel space, top-left origin.
// Valid boxes have finite coordinates and x2 > x1, y2 > y1.
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  bool operator==(const Box&) const = default;
};

// Returns true when the box has finite coordinates and strictly positive area.
bool is_valid(const Box& b);

// Throws std::invalid_argument naming the violated invariant.
void validate(const Box& b);

double area(const Box& b);
double intersection_area(const Box& a, const Box& b);

// Intersection over union. 0 for disjoint boxes.
double iou(const Box& a, const Box& b);

// Intersection over the smaller of the two areas. Equals 1 exactly when one
// box contains the other.
double iom(const Box& a, const Box& b);

enum class OverlapMetric { kIoU, kIoM };

OverlapMetric parse_overlap_metric(const std::string& name);
std::string to_string(OverlapMetric metric);
double overlap(OverlapMetric metric, const Box& a, const Box& b);

struct OcrItem {
  Box box;
  std::string text;
  std::size_t index = 0;
};

struct ElementAnnotation {
  Box box;
  std::string category;
  std::size_t index = 0;
};

// Result of linking OCR items to elements. Both vectors are indexed by the
// element's position in the input list.
struct LinkAssignment {
  std::vector<std::vector<std::size_t>> matched;  // OCR indices, reading order
  std::vector<std::string> descriptions;
};

// Links OCR items to elements without replacement.
//
// Every (element, ocr) pair whose overlap is strictly greater than `threshold`
// is a candidate. Candidates are consumed greedily in descending overlap
// order, ties going to the smaller element index and then the smaller OCR
// index. An OCR item is assigned at most once; an element may collect many.
// Each element's items are ordered by reading order (y1, then x1) and their
// texts joined with single spaces. Elements with no match get "".
LinkAssignment link_ocr(std::span<const ElementAnnotation> elements,
                        std::span<const OcrItem> ocr, double threshold,
                        OverlapMetric metric);

}  // namespace apt
