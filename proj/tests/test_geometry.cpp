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

#include <cmath>
#include <limits>
#include <stdexcept>

#include "apt/geometry.hpp"
#include "apt/rng.hpp"
#include "oracles.hpp"

using namespace apt;

namespace {

ElementAnnotation element(Box b, std::size_t index) { return {b, "button", index}; }
OcrItem ocr_item(Box b, std::string text, std::size_t index) {
  return {b, std::move(text), index};
}

std::size_t pair_count(const LinkAssignment& a) {
  std::size_t n = 0;
  for (const auto& m : a.matched) n += m.size();
  return n;
}

}  // namespace

TEST_CASE("area") {
  CHECK(area({0, 0, 10, 10}) == 100.0);
  CHECK(area({0, 0, 1, 1}) == 1.0);
  CHECK(area({2.5, 0, 4.5, 3}) == 6.0);
}

TEST_CASE("iou values") {
  const Box a{0, 0, 2, 2};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou({0, 0, 1, 1}, {5, 5, 6, 6}) == 0.0);
  const double v = iou(a, {1, 1, 3, 3});
  const auto oracle = testing::raster_overlap(a, {1, 1, 3, 3});
  CHECK(v == doctest::Approx(oracle.iou).epsilon(1e-12));
  CHECK(v == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
}

TEST_CASE("iom values") {
  const Box element{0, 0, 10, 10};
  const Box text{0, 0, 5, 2};
  CHECK(iou(element, text) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(iom(element, text) == 1.0);
  CHECK(iom(element, element) == 1.0);
  const auto oracle = testing::raster_overlap({0, 0, 4, 4}, {2, 0, 6, 4});
  CHECK(oracle.iom == 0.5);
  CHECK(iom({0, 0, 4, 4}, {2, 0, 6, 4}) == 0.5);
}

TEST_CASE("box validation") {
  CHECK(is_valid({0, 0, 1, 1}));
  CHECK_FALSE(is_valid({0, 0, 0, 5}));
  CHECK_FALSE(is_valid({0, 0, std::numeric_limits<double>::infinity(), 5}));
  CHECK_THROWS_WITH(validate({0, 0, 0, 5}), "zero-area box");
}

TEST_CASE("overlap properties on random boxes") {
  Rng rng(11);
  for (int k = 0; k < 2000; ++k) {
    const Box a = testing::random_int_box(rng, 40);
    const Box b = testing::random_int_box(rng, 40);
    const double u = iou(a, b);
    const double m = iom(a, b);
    CHECK(0.0 <= u);
    CHECK(u <= m);
    CHECK(m <= 1.0);
    CHECK(iou(a, b) == iou(b, a));
    CHECK(iom(a, b) == iom(b, a));
    const bool contained = (a.x1 >= b.x1 && a.y1 >= b.y1 && a.x2 <= b.x2 && a.y2 <= b.y2) ||
                           (b.x1 >= a.x1 && b.y1 >= a.y1 && b.x2 <= a.x2 && b.y2 <= a.y2);
    CHECK((m == 1.0) == contained);
  }
}

TEST_CASE("contained boxes have iom 1") {
  Rng rng(12);
  for (int k = 0; k < 200; ++k) {
    const Box outer = testing::random_int_box(rng, 50);
    const double w = outer.x2 - outer.x1;
    const double h = outer.y2 - outer.y1;
    const Box inner{outer.x1 + 0.25 * w, outer.y1 + 0.25 * h, outer.x2 - 0.25 * w,
                    outer.y2 - 0.25 * h};
    CHECK(iom(outer, inner) == 1.0);
    CHECK(iom(inner, outer) == 1.0);
  }
}

TEST_CASE("overlap agrees with rasterization") {
  Rng rng(13);
  for (int k = 0; k < 500; ++k) {
    const Box a = testing::random_int_box(rng, 30);
    const Box b = testing::random_int_box(rng, 30);
    const auto oracle = testing::raster_overlap(a, b);
    CHECK(std::fabs(iou(a, b) - oracle.iou) <= 1e-9);
    CHECK(std::fabs(iom(a, b) - oracle.iom) <= 1e-9);
  }
}

TEST_CASE("metric names") {
  CHECK(parse_overlap_metric("iou") == OverlapMetric::kIoU);
  CHECK(parse_overlap_metric("iom") == OverlapMetric::kIoM);
  CHECK(to_string(OverlapMetric::kIoM) == "iom");
  CHECK_THROWS_AS(parse_overlap_metric("dice"), std::invalid_argument);
}

TEST_CASE("contained text links under iom only") {
  const std::vector<ElementAnnotation> els = {element({0, 0, 10, 10}, 0)};
  const std::vector<OcrItem> ocr = {ocr_item({0, 0, 5, 2}, "Add to cart", 0)};
  const auto by_iom = link_ocr(els, ocr, 0.5, OverlapMetric::kIoM);
  CHECK(by_iom.matched[0] == std::vector<std::size_t>{0});
  CHECK(by_iom.descriptions[0] == "Add to cart");
  const auto by_iou = link_ocr(els, ocr, 0.5, OverlapMetric::kIoU);
  CHECK(by_iou.matched[0].empty());
  CHECK(by_iou.descriptions[0] == "");
}

TEST_CASE("no ocr gives empty descriptions") {
  const std::vector<ElementAnnotation> els = {element({0, 0, 10, 10}, 0),
                                              element({20, 0, 30, 10}, 1)};
  const auto a = link_ocr(els, {}, 0.5, OverlapMetric::kIoM);
  CHECK(a.descriptions == std::vector<std::string>{"", ""});
}

TEST_CASE("greedy assignment takes the larger overlap") {
  // OCR (0,0,10,10); element 0 covers 90% of it, element 1 covers 70%.
  const std::vector<ElementAnnotation> els = {element({3, 0, 20, 10}, 0),
                                              element({1, 0, 20, 10}, 1)};
  const std::vector<OcrItem> ocr = {ocr_item({0, 0, 10, 10}, "x", 0)};
  CHECK(iom(els[0].box, ocr[0].box) == doctest::Approx(0.7));
  CHECK(iom(els[1].box, ocr[0].box) == doctest::Approx(0.9));
  const auto a = link_ocr(els, ocr, 0.5, OverlapMetric::kIoM);
  CHECK(a.matched[0].empty());
  CHECK(a.matched[1] == std::vector<std::size_t>{0});

  // Either order of consuming the two candidate pairs: the first consumed
  // pair wins, and only max-first gives the 0.9 element the item.
  std::vector<ElementAnnotation> swapped = {els[1], els[0]};
  swapped[0].index = 0;
  swapped[1].index = 1;
  const auto b = link_ocr(swapped, ocr, 0.5, OverlapMetric::kIoM);
  CHECK(b.matched[0] == std::vector<std::size_t>{0});
  CHECK(b.matched[1].empty());
}

TEST_CASE("ties go to the smaller element index") {
  const std::vector<ElementAnnotation> els = {element({0, 0, 10, 10}, 0),
                                              element({0, 0, 10, 10}, 1)};
  const std::vector<OcrItem> ocr = {ocr_item({1, 1, 4, 4}, "a", 0)};
  const auto a = link_ocr(els, ocr, 0.5, OverlapMetric::kIoM);
  CHECK(a.matched[0] == std::vector<std::size_t>{0});
  CHECK(a.matched[1].empty());
}

TEST_CASE("phrases are joined in reading order") {
  const std::vector<ElementAnnotation> els = {element({0, 0, 100, 100}, 0)};
  const std::vector<OcrItem> ocr = {ocr_item({50, 40, 90, 50}, "world", 0),
                                    ocr_item({10, 40, 45, 50}, "hello", 1),
                                    ocr_item({10, 10, 90, 20}, "Title", 2)};
  const auto a = link_ocr(els, ocr, 0.5, OverlapMetric::kIoM);
  CHECK(a.matched[0] == std::vector<std::size_t>{2, 1, 0});
  CHECK(a.descriptions[0] == "Title hello world");
}

TEST_CASE("threshold is strict") {
  const std::vector<ElementAnnotation> els = {element({0, 0, 4, 4}, 0)};
  const std::vector<OcrItem> ocr = {ocr_item({2, 0, 6, 4}, "half", 0)};
  CHECK(link_ocr(els, ocr, 0.5, OverlapMetric::kIoM).matched[0].empty());
  CHECK(link_ocr(els, ocr, 0.49, OverlapMetric::kIoM).matched[0].size() == 1);
  const std::vector<OcrItem> inside = {ocr_item({1, 1, 2, 2}, "in", 0)};
  CHECK(link_ocr(els, inside, 1.0, OverlapMetric::kIoM).matched[0].empty());
}

TEST_CASE("non-finite threshold is rejected") {
  const std::vector<ElementAnnotation> els = {element({0, 0, 4, 4}, 0)};
  CHECK_THROWS_AS(link_ocr(els, {}, std::nan(""), OverlapMetric::kIoM),
                  std::invalid_argument);
}

TEST_CASE("linking properties on random layouts") {
  Rng rng(14);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ElementAnnotation> els;
    std::vector<OcrItem> ocr;
    const std::size_t ne = 1 + rng.below(5);
    const std::size_t no = rng.below(8);
    for (std::size_t e = 0; e < ne; ++e) els.push_back(element(testing::random_int_box(rng, 60), e));
    for (std::size_t o = 0; o < no; ++o) {
      ocr.push_back(ocr_item(testing::random_int_box(rng, 60), "t" + std::to_string(o), o));
    }
    const double thr = rng.uniform(0.0, 0.9);
    const auto by_iom = link_ocr(els, ocr, thr, OverlapMetric::kIoM);
    const auto by_iou = link_ocr(els, ocr, thr, OverlapMetric::kIoU);
    std::vector<int> seen(no, 0);
    for (std::size_t e = 0; e < ne; ++e) {
      for (std::size_t o : by_iom.matched[e]) ++seen[o];
      CHECK(by_iom.matched[e].empty() == by_iom.descriptions[e].empty());
    }
    for (int s : seen) CHECK(s <= 1);
    CHECK(pair_count(by_iom) >= pair_count(by_iou));
  }
}
