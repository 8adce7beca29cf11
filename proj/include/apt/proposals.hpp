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

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "apt/dataio.hpp"
#include "apt/embedding_store.hpp"
#include "apt/head.hpp"

namespace apt {

// Raised when embedding keys are missing; lists every missing key.
class MissingKeysError : public std::runtime_error {
 public:
  explicit MissingKeysError(std::vector<std::string> keys);
  const std::vector<std::string>& keys() const { return keys_; }

 private:
  std::vector<std::string> keys_;
};

// Proposals built from annotated screens, with provenance for each row.
struct ProposalSet {
  ProposalBatch batch;  // labels index the CategorySet it was built with
  std::vector<std::string> image_ids;
  std::vector<std::size_t> element_indices;
  std::vector<Box> boxes;

  std::size_t size() const { return batch.size(); }
  // Rows whose label is in `categories`, labels re-indexed to positions in it.
  ProposalSet restrict_to(std::span<const std::size_t> categories) const;
};

// Prompt vectors "prompt:<name>" for every category, in CategorySet order.
CategoryPrompts load_prompts(const EmbeddingStore& store,
                             const CategorySet& categories);

// One proposal per element of every (linked) screen. Throws
// MissingKeysError after collecting all absent keys.
ProposalSet build_proposals(std::span<const ScreenAnnotation> screens,
                            const EmbeddingStore& store,
                            const CategorySet& categories,
                            DescriptionMode mode = DescriptionMode::kConcat);

// Throws std::runtime_error when the store has no empty-word record.
void require_empty_word(const EmbeddingStore& store);

}  // namespace apt
