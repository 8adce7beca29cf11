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
#include "apt/synth.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "apt/matrix.hpp"
#include "apt/rng.hpp"

namespace apt {

namespace {

constexpr const char* kNames[] = {"product", "icon", "button", "card", "tips",
                                  "menu"};
constexpr int kWidth = 1080;
constexpr int kHeight = 1920;

using Vec = std::vector<double>;

Vec gaussian(Rng& rng, std::size_t d) {
  Vec v(d);
  for (double& x : v) x = rng.normal();
  return v;
}

void normalize(Vec& v) {
  const double n = std::sqrt(dot(v, v));
  for (double& x : v) x /= n;
}

// Removes the components of v along the orthonormal vectors in `basis`.
void orthogonalize(Vec& v, const std::vector<Vec>& basis) {
  for (const Vec& b : basis) {
    const double p = dot(v, b);
    for (std::size_t c = 0; c < v.size(); ++c) v[c] -= p * b[c];
  }
}

Vec unit(Rng& rng, std::size_t d) {
  Vec v = gaussian(rng, d);
  normalize(v);
  return v;
}

std::string category_name(std::size_t c) {
  if (c < std::size(kNames)) return kNames[c];
  return "category" + std::to_string(c);
}

}  // namespace

void validate(const SynthConfig& cfg) {
  if (cfg.dim < 4) throw std::invalid_argument("synth dim must be at least 4");
  if (cfg.categories < 2) throw std::invalid_argument("synth needs >= 2 categories");
  if (cfg.n_val < 1) throw std::invalid_argument("synth n_val must be >= 1");
  if (cfg.vision_noise < 0 || cfg.ocr_noise < 0) {
    throw std::invalid_argument("noise levels must be non-negative");
  }
  if (!(cfg.ocr_signal >= 0.0 && cfg.ocr_signal <= 1.0)) {
    throw std::invalid_argument("ocr_signal must lie in [0, 1]");
  }
  if (2 * cfg.ambiguity > cfg.categories) {
    throw std::invalid_argument("ambiguity pairs exceed category count");
  }
  if (!(cfg.prompt_cosine > -1.0 && cfg.prompt_cosine < 1.0)) {
    throw std::invalid_argument("prompt_cosine must lie in (-1, 1)");
  }
  if (cfg.novel >= cfg.categories) {
    throw std::invalid_argument("at least one category must be base");
  }
  if (cfg.elements_per_image < 1 || cfg.elements_per_image > 16) {
    throw std::invalid_argument("elements_per_image must lie in [1, 16]");
  }
}

SynthDataset generate(const SynthConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);
  const std::size_t d = cfg.dim;
  const std::size_t m = cfg.categories;

  std::vector<Vec> prompts(m);
  for (std::size_t c = 0; c < m; ++c) prompts[c] = unit(rng, d);
  for (std::size_t k = 0; k < cfg.ambiguity; ++k) {
    const Vec& anchor = prompts[2 * k];
    Vec w = gaussian(rng, d);
    orthogonalize(w, {anchor});
    normalize(w);
    const double s = std::sqrt(1.0 - cfg.prompt_cosine * cfg.prompt_cosine);
    Vec twin(d);
    for (std::size_t c = 0; c < d; ++c) twin[c] = cfg.prompt_cosine * anchor[c] + s * w[c];
    prompts[2 * k + 1] = twin;
  }

  // Appearance directions avoid the prompt span (when there is room), so
  // that noise-free vision embeddings score their own prompt highest.
  std::vector<Vec> prompt_basis;
  for (const Vec& t : prompts) {
    Vec b = t;
    orthogonalize(b, prompt_basis);
    const double n = std::sqrt(dot(b, b));
    if (n > 1e-9) {
      for (double& x : b) x /= n;
      prompt_basis.push_back(b);
    }
  }
  std::vector<Vec> appearance(m);
  for (std::size_t c = 0; c < m; ++c) {
    Vec a = gaussian(rng, d);
    if (prompt_basis.size() < d) {
      orthogonalize(a, prompt_basis);
    } else {
      std::fill(a.begin(), a.end(), 0.0);
    }
    const double n = std::sqrt(dot(a, a));
    if (n > 0) {
      for (double& x : a) x /= n;
    }
    appearance[c] = a;
  }
  std::vector<Vec> text_protos(m);
  for (std::size_t c = 0; c < m; ++c) text_protos[c] = unit(rng, d);
  const Vec text_shared = unit(rng, d);

  SynthDataset out;
  std::vector<Category> cats;
  for (std::size_t c = 0; c < m; ++c) {
    cats.push_back({category_name(c), c + cfg.novel >= m ? CategorySplit::kNovel
                                                          : CategorySplit::kBase});
  }
  out.categories = CategorySet(std::move(cats));
  out.store = EmbeddingStore(static_cast<std::uint32_t>(d));
  out.store.insert(std::string(kEmptyWordKey), Vec(d, 0.0));
  for (std::size_t c = 0; c < m; ++c) {
    out.store.insert(prompt_key(category_name(c)), prompts[c]);
  }

  const double noise_scale = 1.0 / std::sqrt(static_cast<double>(d));
  auto make_split = [&](const std::string& prefix, std::size_t per_category) {
    std::vector<std::size_t> labels;
    for (std::size_t k = 0; k < per_category; ++k) {
      for (std::size_t c = 0; c < m; ++c) labels.push_back(c);
    }
    rng.shuffle(labels);

    std::vector<ScreenAnnotation> screens;
    const std::size_t per_image = cfg.elements_per_image;
    const double slot = static_cast<double>(kHeight - 40) / static_cast<double>(per_image);
    for (std::size_t first = 0; first < labels.size(); first += per_image) {
      ScreenAnnotation screen;
      screen.image_id = prefix + "_" + std::to_string(screens.size());
      screen.width = kWidth;
      screen.height = kHeight;
      const std::size_t count = std::min(per_image, labels.size() - first);
      for (std::size_t e = 0; e < count; ++e) {
        const std::size_t c = labels[first + e];
        ElementAnnotation el;
        el.index = e;
        el.category = category_name(c);
        el.box = {40.0, 20.0 + slot * static_cast<double>(e), kWidth - 40.0,
                  slot * static_cast<double>(e + 1)};
        screen.elements.push_back(el);

        // Each sample carries its class identity (beyond the prompt-aligned
        // part) in exactly one modality: OCR with probability ocr_signal,
        // otherwise the appearance part of the vision embedding.
        const bool ocr_carries = rng.uniform() < cfg.ocr_signal;
        Vec f(d);
        for (std::size_t k = 0; k < d; ++k) {
          f[k] = prompts[c][k] + (ocr_carries ? 0.0 : cfg.appearance * appearance[c][k]) +
                 cfg.vision_noise * noise_scale * rng.normal();
        }
        out.store.insert(vision_key(screen.image_id, e), f);

        const Vec& proto = ocr_carries ? text_protos[c] : text_shared;
        Vec o(d);
        for (std::size_t k = 0; k < d; ++k) {
          o[k] = proto[k] + cfg.ocr_noise * noise_scale * rng.normal();
        }
        const bool empty = rng.uniform() < cfg.empty_ocr_fraction;
        if (!empty) {
          // A text line covering ~9% of the element near its top-left corner.
          const Box& b = el.box;
          const double w = b.x2 - b.x1;
          const double h = b.y2 - b.y1;
          OcrItem item;
          item.index = screen.ocr.size();
          item.text = screen.image_id + "_text" + std::to_string(e);
          item.box = {b.x1 + 0.05 * w, b.y1 + 0.05 * h, b.x1 + 0.35 * w,
                      b.y1 + 0.35 * h};
          out.store.insert(ocr_key(item.text), o);
          screen.ocr.push_back(std::move(item));
        }
      }
      screens.push_back(std::move(screen));
    }
    return screens;
  };
  out.train = make_split("train", cfg.n_train);
  out.val = make_split("val", cfg.n_val);
  return out;
}

}  // namespace apt
