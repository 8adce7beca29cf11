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

#include <filesystem>

#include "apt/embedding_store.hpp"
#include "apt/head.hpp"

namespace apt {

// A head stored in the embedding file format. Every tensor is split into
// records of `dim` floats keyed "<name>#<chunk>", the last chunk zero padded:
//   phi<k>/w:layer<l>, phi<k>/b:layer<l>,
//   phi<k>/bn<l>:gamma, :beta, :running_mean, :running_var,
//   fusion/prompt:w, fusion/prompt:b, fusion/vision:w, fusion/vision:b,
//   meta = [format, dim, reduction, layers, fusion, tuning, share_weights,
//           use_ocr, use_vision, tau bits 63..44, 43..22, 21..0].
// Weights are rounded to 32-bit floats; tau is kept bit for bit.
EmbeddingStore checkpoint_store(const AptHead& head);
// Throws FormatError on missing records or inconsistent metadata.
AptHead head_from_store(const EmbeddingStore& store);

void save_checkpoint(const AptHead& head, const std::filesystem::path& path);
AptHead load_checkpoint(const std::filesystem::path& path);

}  // namespace apt
