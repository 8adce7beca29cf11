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
#include "apt/proposals.hpp"

#include <algorithm>
#include <set>

namespace apt {

namespace {

std::string join_keys(const std::vector<std::string>& keys) {
  std::string out;
  for (const auto& k : keys) out += "\n  '" + k + "'";
  return out;
}

}  // namespace

MissingKeysError::MissingKeysError(std::vector<std::string> keys)
    : std::runtime_error("missing " + std::to_string(keys.size()) +
                         " embedding key(s):" + join_keys(keys)),
      keys_(std::move(keys)) {}

ProposalSet ProposalSet::restrict_to(std::span<const std::size_t> categories) const {
  std::vector<std::size_t> rows;
  std::vector<std::size_t> remap;
  for (std::size_t i = 0; i < size(); ++i) {
    auto it = std::find(categories.begin(), categories.end(), batch.labels[i]);
    if (it == categories.end()) continue;
    rows.push_back(i);
    remap.push_back(static_cast<std::size_t>(it - categories.begin()));
  }
  ProposalSet out;
  out.batch = batch.select(rows);
  out.batch.labels = std::move(remap);
  for (std::size_t r : rows) {
    out.image_ids.push_back(image_ids[r]);
    out.element_indices.push_back(element_indices[r]);
    out.boxes.push_back(boxes[r]);
  }
  return out;
}

CategoryPrompts load_prompts(const EmbeddingStore& store,
                             const CategorySet& categories) {
  std::vector<std::string> missing;
  for (const auto& c : categories.categories()) {
    if (!store.contains(prompt_key(c.name))) missing.push_back(prompt_key(c.name));
  }
  if (!missing.empty()) throw MissingKeysError(std::move(missing));
  CategoryPrompts prompts;
  prompts.vectors = Matrix(categories.size(), store.dim());
  for (std::size_t j = 0; j < categories.size(); ++j) {
    auto v = store.at(prompt_key(categories[j].name));
    std::copy(v.begin(), v.end(), prompts.vectors.row(j).begin());
    prompts.names.push_back(categories[j].name);
  }
  return prompts;
}

void require_empty_word(const EmbeddingStore& store) {
  if (!store.contains(kEmptyWordKey)) {
    throw std::runtime_error("embedding store has no empty-word record (key \"\")");
  }
}

ProposalSet build_proposals(std::span<const ScreenAnnotation> screens,
                            const EmbeddingStore& store,
                            const CategorySet& categories, DescriptionMode mode) {
  std::size_t total = 0;
  for (const auto& s : screens) total += s.elements.size();
  const std::size_t d = store.dim();

  ProposalSet out;
  out.batch.vision = Matrix(total, d);
  out.batch.ocr = Matrix(total, d);
  std::set<std::string> missing;
  std::size_t row = 0;
  for (const auto& s : screens) {
    for (std::size_t e = 0; e < s.elements.size(); ++e, ++row) {
      const auto& el = s.elements[e];
      const auto label = categories.find(el.category);
      if (!label) {
        throw std::out_of_range("screen '" + s.image_id + "' element " +
                                std::to_string(e) + ": unknown category '" +
                                el.category + "'");
      }
      out.batch.labels.push_back(*label);
      out.image_ids.push_back(s.image_id);
      out.element_indices.push_back(e);
      out.boxes.push_back(el.box);

      const std::string vkey = vision_key(s.image_id, e);
      if (store.contains(vkey)) {
        auto v = store.at(vkey);
        std::copy(v.begin(), v.end(), out.batch.vision.row(row).begin());
      } else {
        missing.insert(vkey);
      }

      const auto phrases = linked_phrases(s, e);
      std::vector<std::string> keys;
      if (phrases.empty()) {
        keys.emplace_back(kEmptyWordKey);
      } else if (mode == DescriptionMode::kConcat) {
        keys.push_back(ocr_key(s.links->descriptions[e]));
      } else {
        for (const auto& p : phrases) keys.push_back(ocr_key(p));
      }
      bool ok = true;
      for (const auto& k : keys) {
        if (!store.contains(k)) {
          missing.insert(k);
          ok = false;
        }
      }
      if (ok) {
        std::vector<double> o;
        if (phrases.empty() || mode == DescriptionMode::kAverage) {
          o = resolve_description_embedding(store, phrases, mode);
        } else {
          o = store.at_f64(keys.front());
        }
        std::copy(o.begin(), o.end(), out.batch.ocr.row(row).begin());
      }
    }
  }
  if (!missing.empty()) {
    throw MissingKeysError({missing.begin(), missing.end()});
  }
  return out;
}

}  // namespace apt
