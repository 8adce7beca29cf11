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

#include <cstdint>
#include <vector>

#include "apt/dataio.hpp"
#include "apt/embedding_store.hpp"

namespace apt {

// Synthetic screens whose OCR text carries class identity that frozen
// prompts miss. Pairs of categories get nearly collinear prompts, so the
// frozen-prompt classifier confuses them unless it uses the OCR and the
// appearance components of the vision embedding.
struct SynthConfig {
  std::uint64_t seed = 7;
  std::size_t dim = 64;
  std::size_t categories = 6;
  std::size_t n_train = 3000;  // per category
  std::size_t n_val = 100;    // per category
  double vision_noise = 1.5;
  // Probability that a sample's identity is carried by its OCR text. The
  // remaining samples carry it in the vision appearance instead and get
  // the shared, class-free text prototype.
  double ocr_signal = 0.7;
  std::size_t ambiguity = 2;  // number of near-collinear prompt pairs

  double ocr_noise = 1.0;
  double appearance = 1.0;
  double prompt_cosine = 0.97;  // cosine within an ambiguous pair
  std::size_t elements_per_image = 4;
  std::size_t novel = 0;  // trailing categories marked novel
  double empty_ocr_fraction = 0.0;
};

void validate(const SynthConfig& cfg);

struct SynthDataset {
  EmbeddingStore store;
  std::vector<ScreenAnnotation> train;  // image ids "train_<k>"
  std::vector<ScreenAnnotation> val;    // image ids "val_<k>"
  CategorySet categories;
};

// Pure function of the config.
SynthDataset generate(const SynthConfig& cfg);

}  // namespace apt
