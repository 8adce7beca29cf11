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
#include "apt/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <string>

namespace apt {

namespace {

constexpr double kCheckpointFormat = 1.0;
constexpr std::size_t kMetaSize = 12;
// tau is stored bit-exactly as three integers of at most 22 bits.
constexpr std::uint64_t kTauMask = (std::uint64_t{1} << 22) - 1;

void put(EmbeddingStore& store, const std::string& name, std::span<const double> values) {
  const std::size_t d = store.dim();
  const std::size_t chunks = (values.size() + d - 1) / d;
  for (std::size_t c = 0; c < chunks; ++c) {
    std::vector<float> rec(d, 0.0f);
    for (std::size_t k = 0; k < d && c * d + k < values.size(); ++k) {
      rec[k] = static_cast<float>(values[c * d + k]);
    }
    store.insert(name + "#" + std::to_string(c), std::move(rec));
  }
}

void get(const EmbeddingStore& store, const std::string& name, std::span<double> out) {
  const std::size_t d = store.dim();
  const std::size_t chunks = (out.size() + d - 1) / d;
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::string key = name + "#" + std::to_string(c);
    if (!store.contains(key)) throw FormatError("missing checkpoint record '" + key + "'");
    const auto rec = store.at(key);
    for (std::size_t k = 0; k < d && c * d + k < out.size(); ++k) {
      out[c * d + k] = rec[k];
    }
  }
}


template <typename Fn>
void for_each_tensor(std::vector<AptNetwork>& nets, std::optional<AttentionFusion>& pmap,
                     std::optional<AttentionFusion>& vmap, Fn&& fn) {
  for (std::size_t k = 0; k < nets.size(); ++k) {
    auto& layers = nets[k].layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const std::string p = "phi" + std::to_string(k) + "/";
      const std::string n = std::to_string(l + 1);
      Bottleneck& b = layers[l];
      fn(p + "w:layer" + n, b.weight.values());
      fn(p + "b:layer" + n, std::span<double>(b.bias));
      fn(p + "bn" + n + ":gamma", std::span<double>(b.gamma));
      fn(p + "bn" + n + ":beta", std::span<double>(b.beta));
      fn(p + "bn" + n + ":running_mean", std::span<double>(b.running_mean));
      fn(p + "bn" + n + ":running_var", std::span<double>(b.running_var));
    }
  }
  if (pmap) {
    fn("fusion/prompt:w", pmap->weight.values());
    fn("fusion/prompt:b", std::span<double>(pmap->bias));
  }
  if (vmap) {
    fn("fusion/vision:w", vmap->weight.values());
    fn("fusion/vision:b", std::span<double>(vmap->bias));
  }
}

}  // namespace

EmbeddingStore checkpoint_store(const AptHead& head) {
  const HeadConfig& cfg = head.config();
  const NetworkShape& shape = head.shape();
  EmbeddingStore store(static_cast<std::uint32_t>(shape.dim));
  const auto tau_bits = std::bit_cast<std::uint64_t>(cfg.tau);
  const std::vector<double> meta = {kCheckpointFormat,
                                    static_cast<double>(shape.dim),
                                    static_cast<double>(shape.reduction),
                                    static_cast<double>(shape.layers),
                                    static_cast<double>(cfg.fusion),
                                    static_cast<double>(cfg.tuning),
                                    cfg.share_weights ? 1.0 : 0.0,
                                    cfg.use_ocr ? 1.0 : 0.0,
                                    cfg.use_vision ? 1.0 : 0.0,
                                    static_cast<double>(tau_bits >> 44),
                                    static_cast<double>((tau_bits >> 22) & kTauMask),
                                    static_cast<double>(tau_bits & kTauMask)};
  put(store, "meta", meta);
  AptHead copy = head;
  for_each_tensor(copy.networks(), copy.prompt_fusion(), copy.vision_fusion(),
                  [&](const std::string& name, std::span<double> v) { put(store, name, v); });
  return store;
}

AptHead head_from_store(const EmbeddingStore& store) {
  if (store.dim() == 0) throw FormatError("checkpoint has dim 0");
  std::vector<double> meta(kMetaSize);
  get(store, "meta", meta);
  for (double v : meta) {
    if (!std::isfinite(v)) throw FormatError("bad checkpoint metadata");
  }
  if (meta[0] != kCheckpointFormat) throw FormatError("checkpoint format mismatch");
  if (meta[1] != store.dim()) throw FormatError("checkpoint dim does not match file dim");
  auto flag = [&](std::size_t i) {
    if (meta[i] != 0.0 && meta[i] != 1.0) throw FormatError("bad checkpoint flag");
    return meta[i] == 1.0;
  };
  auto enum_value = [&](std::size_t i, int count) {
    const double v = meta[i];
    if (v < 0 || v >= count || v != std::floor(v)) {
      throw FormatError("bad checkpoint enum value");
    }
    return static_cast<int>(v);
  };
  NetworkShape shape;
  shape.dim = store.dim();
  shape.reduction = static_cast<std::size_t>(meta[2]);
  shape.layers = static_cast<std::size_t>(meta[3]);
  HeadConfig cfg;
  cfg.fusion = static_cast<Fusion>(enum_value(4, 3));
  cfg.tuning = static_cast<Tuning>(enum_value(5, 4));
  cfg.share_weights = flag(6);
  cfg.use_ocr = flag(7);
  cfg.use_vision = flag(8);
  for (std::size_t i = 9; i < kMetaSize; ++i) {
    if (meta[i] < 0 || meta[i] > static_cast<double>(kTauMask) || meta[i] != std::floor(meta[i])) {
      throw FormatError("bad checkpoint metadata");
    }
  }
  cfg.tau = std::bit_cast<double>((static_cast<std::uint64_t>(meta[9]) << 44) |
                                  (static_cast<std::uint64_t>(meta[10]) << 22) |
                                  static_cast<std::uint64_t>(meta[11]));
  try {
    validate(shape);
    validate(cfg);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("bad checkpoint metadata: ") + e.what());
  }
  Rng rng(0);
  AptHead head(cfg, shape, rng);
  for_each_tensor(head.networks(), head.prompt_fusion(), head.vision_fusion(),
                  [&](const std::string& name, std::span<double> v) { get(store, name, v); });
  return head;
}

void save_checkpoint(const AptHead& head, const std::filesystem::path& path) {
  write_embeddings(checkpoint_store(head), path);
}

AptHead load_checkpoint(const std::filesystem::path& path) {
  return head_from_store(read_embeddings(path));
}

}  // namespace apt
