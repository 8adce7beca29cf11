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
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "apt/embedding_store.hpp"
#include "apt/geometry.hpp"

namespace apt {

// Malformed annotation or category input. `line()` is 1-based.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct ScreenAnnotation {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::vector<ElementAnnotation> elements;
  std::vector<OcrItem> ocr;
  // Present once OCR items have been linked to elements.
  std::optional<LinkAssignment> links;
};

// One JSON object per non-empty line:
//   {"image_id": "...", "width": W, "height": H,
//    "elements": [{"bbox": [x1,y1,x2,y2], "category": "...",
//                  "description": "...", "ocr_ids": [..]}],   // last two optional
//    "ocr": [{"bbox": [...], "text": "..."}]}
ScreenAnnotation parse_annotation_line(std::string_view line,
                                       std::size_t line_number);
std::vector<ScreenAnnotation> parse_annotations_text(std::string_view text);
std::vector<ScreenAnnotation> parse_annotations(
    const std::filesystem::path& path);

std::string serialize_annotation(const ScreenAnnotation& screen);
void write_annotations(std::span<const ScreenAnnotation> screens,
                       const std::filesystem::path& path);

enum class CategorySplit { kBase, kNovel };

struct Category {
  std::string name;
  CategorySplit split = CategorySplit::kBase;
};

// Ordered category list; names unique, at least one base category.
class CategorySet {
 public:
  CategorySet() = default;
  explicit CategorySet(std::vector<Category> categories);

  std::size_t size() const { return categories_.size(); }
  const Category& operator[](std::size_t i) const { return categories_[i]; }
  const std::vector<Category>& categories() const { return categories_; }

  std::optional<std::size_t> find(std::string_view name) const;
  // Throws std::out_of_range for unknown names.
  std::size_t index_of(std::string_view name) const;

  std::vector<std::size_t> indices(CategorySplit split) const;
  std::vector<std::size_t> all_indices() const;

 private:
  std::vector<Category> categories_;
};

// Lines of the form "name,base" or "name,novel"; blank lines ignored.
CategorySet parse_categories(std::string_view text);
CategorySet read_categories(const std::filesystem::path& path);
void write_categories(const CategorySet& categories,
                      const std::filesystem::path& path);

enum class DescriptionMode { kConcat, kAverage };

DescriptionMode parse_description_mode(const std::string& name);

// Looks up the encoded description of an element. `phrases` are the linked
// OCR texts in reading order. kConcat uses the key of the space-joined text;
// kAverage takes the component-wise mean of the per-phrase vectors. No
// phrases resolves to the empty word in both modes. Missing keys raise
// std::out_of_range naming the key.
std::vector<double> resolve_description_embedding(
    const EmbeddingStore& store, std::span<const std::string> phrases,
    DescriptionMode mode);

// Concat-mode lookup of an already joined description.
std::vector<double> resolve_description_embedding(const EmbeddingStore& store,
                                                  std::string_view description);

// Phrases linked to element `e` of a screen, in reading order. Requires links.
std::vector<std::string> linked_phrases(const ScreenAnnotation& screen,
                                        std::size_t e);

// Links every screen that has no links yet.
void ensure_linked(std::vector<ScreenAnnotation>& screens, double threshold,
                   OverlapMetric metric);

}  // namespace apt
