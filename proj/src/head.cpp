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
#include "apt/head.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace apt {

std::string to_string(Fusion f) {
  switch (f) {
    case Fusion::kSum: return "sum";
    case Fusion::kMultiply: return "multiply";
    case Fusion::kAttention: return "attention";
  }
  return "?";
}

std::string to_string(Tuning t) {
  switch (t) {
    case Tuning::kPromptBoth: return "prompt_both";
    case Tuning::kPromptOcrVisVis: return "prompt_ocr_vis_vis";
    case Tuning::kPromptVisVisOcr: return "prompt_vis_vis_ocr";
    case Tuning::kVisBoth: return "vis_both";
  }
  return "?";
}

Fusion parse_fusion(const std::string& name) {
  for (Fusion f : {Fusion::kSum, Fusion::kMultiply, Fusion::kAttention}) {
    if (to_string(f) == name) return f;
  }
  throw std::invalid_argument("unknown fusion '" + name + "'");
}

Tuning parse_tuning(const std::string& name) {
  for (Tuning t : {Tuning::kPromptBoth, Tuning::kPromptOcrVisVis,
                   Tuning::kPromptVisVisOcr, Tuning::kVisBoth}) {
    if (to_string(t) == name) return t;
  }
  throw std::invalid_argument("unknown tuning '" + name + "'");
}

void validate(const HeadConfig& cfg) {
  if (!(cfg.tau > 0.0) || !std::isfinite(cfg.tau)) {
    throw std::invalid_argument("temperature tau must be positive and finite");
  }
}

std::vector<Offset> prompt_side(const HeadConfig& cfg) {
  std::vector<Offset> out;
  const bool ocr = cfg.tuning == Tuning::kPromptBoth ||
                   cfg.tuning == Tuning::kPromptOcrVisVis;
  const bool vis = cfg.tuning == Tuning::kPromptBoth ||
                   cfg.tuning == Tuning::kPromptVisVisOcr;
  if (ocr && cfg.use_ocr) out.push_back(Offset::kOcr);
  if (vis && cfg.use_vision) out.push_back(Offset::kVision);
  return out;
}

std::vector<Offset> vision_side(const HeadConfig& cfg) {
  std::vector<Offset> out;
  const bool ocr = cfg.tuning == Tuning::kVisBoth ||
                   cfg.tuning == Tuning::kPromptVisVisOcr;
  const bool vis = cfg.tuning == Tuning::kVisBoth ||
                   cfg.tuning == Tuning::kPromptOcrVisVis;
  if (ocr && cfg.use_ocr) out.push_back(Offset::kOcr);
  if (vis && cfg.use_vision) out.push_back(Offset::kVision);
  return out;
}

CategoryPrompts CategoryPrompts::subset(std::span<const std::size_t> indices) const {
  CategoryPrompts out;
  out.vectors = Matrix(indices.size(), dim());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= size()) throw std::out_of_range("category index out of range");
    auto src = vectors.row(indices[k]);
    std::copy(src.begin(), src.end(), out.vectors.row(k).begin());
    out.names.push_back(names.empty() ? std::string() : names.at(indices[k]));
  }
  return out;
}

ProposalBatch ProposalBatch::select(std::span<const std::size_t> rows) const {
  ProposalBatch out;
  out.vision = Matrix(rows.size(), vision.cols());
  out.ocr = Matrix(rows.size(), ocr.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    auto f = vision.row(rows[k]);
    auto o = ocr.row(rows[k]);
    std::copy(f.begin(), f.end(), out.vision.row(k).begin());
    std::copy(o.begin(), o.end(), out.ocr.row(k).begin());
    if (!labels.empty()) out.labels.push_back(labels[rows[k]]);
  }
  return out;
}

namespace {

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// Fuses `base` with `parts` for one side. Attention expects
// map.weight = [W_base | W_part0 | ...].
std::vector<double> fuse(Fusion fusion, std::span<const double> base,
                         const std::vector<std::span<const double>>& parts,
                         const AttentionFusion* map) {
  const std::size_t d = base.size();
  std::vector<double> out(base.begin(), base.end());
  if (parts.empty()) return out;
  switch (fusion) {
    case Fusion::kSum:
      for (const auto& p : parts) {
        for (std::size_t c = 0; c < d; ++c) out[c] += p[c];
      }
      break;
    case Fusion::kMultiply:
      for (const auto& p : parts) {
        for (std::size_t c = 0; c < d; ++c) out[c] *= p[c];
      }
      break;
    case Fusion::kAttention: {
      if (map == nullptr || map->weight.cols() != d * (parts.size() + 1)) {
        throw std::invalid_argument("attention fusion map missing or mis-sized");
      }
      for (std::size_t r = 0; r < d; ++r) {
        auto w = map->weight.row(r);
        double s = map->bias[r] + dot(w.subspan(0, d), base);
        for (std::size_t k = 0; k < parts.size(); ++k) {
          s += dot(w.subspan((k + 1) * d, d), parts[k]);
        }
        out[r] = s;
      }
      break;
    }
  }
  return out;
}

// [I | I | ...]: starts out equal to sum fusion.
AttentionFusion sum_like_fusion(std::size_t d, std::size_t parts) {
  AttentionFusion map;
  map.weight = Matrix(d, d * (parts + 1));
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t k = 0; k <= parts; ++k) map.weight(r, k * d + r) = 1.0;
  }
  map.bias.assign(d, 0.0);
  return map;
}

void check_dims(const CategoryPrompts& prompts, const ProposalBatch& batch,
                std::size_t d) {
  if (prompts.dim() != d || batch.vision.cols() != d || batch.ocr.cols() != d) {
    throw std::invalid_argument("prompt/proposal dimension mismatch with head dim " +
                                std::to_string(d));
  }
  if (batch.ocr.rows() != batch.vision.rows()) {
    throw std::invalid_argument("vision and OCR batches differ in length");
  }
  if (prompts.size() == 0) throw std::invalid_argument("no category prompts");
}

void softmax_row(std::span<const double> logits, std::span<double> probs) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    probs[j] = std::exp(logits[j] - mx);
    z += probs[j];
  }
  for (double& p : probs) p /= z;
}

[[noreturn]] void zero_norm(std::size_t i, std::size_t j) {
  throw std::domain_error("zero-norm vector in cosine (proposal " +
                          std::to_string(i) + ", category " + std::to_string(j) +
                          ")");
}

}  // namespace

TunedPair tune_with_offsets(const HeadConfig& cfg, std::span<const double> t,
                            std::span<const double> f, std::span<const double> o,
                            std::span<const double> v,
                            const AttentionFusion* prompt_map,
                            const AttentionFusion* vision_map) {
  if (t.size() != f.size() || o.size() != f.size() || v.size() != f.size()) {
    throw std::invalid_argument("tune: dimension mismatch");
  }
  auto pick = [&](Offset which) { return which == Offset::kOcr ? o : v; };
  std::vector<std::span<const double>> p_parts, v_parts;
  for (Offset k : prompt_side(cfg)) p_parts.push_back(pick(k));
  for (Offset k : vision_side(cfg)) v_parts.push_back(pick(k));
  return {fuse(cfg.fusion, t, p_parts, prompt_map),
          fuse(cfg.fusion, f, v_parts, vision_map)};
}

Matrix baseline_probabilities(const CategoryPrompts& prompts, const Matrix& vision,
                              double tau) {
  if (prompts.dim() != vision.cols()) {
    throw std::invalid_argument("prompt/vision dimension mismatch");
  }
  const std::size_t n = vision.rows();
  const std::size_t m = prompts.size();
  Matrix probs(n, m);
  std::vector<double> logits(m);
  for (std::size_t i = 0; i < n; ++i) {
    const double nf = norm(vision.row(i));
    for (std::size_t j = 0; j < m; ++j) {
      const double nt = norm(prompts.vectors.row(j));
      if (nf == 0.0 || nt == 0.0) zero_norm(i, j);
      logits[j] = dot(prompts.vectors.row(j), vision.row(i)) / (nt * nf) / tau;
    }
    softmax_row(logits, probs.row(i));
  }
  return probs;
}

double cross_entropy(const Matrix& probs, std::span<const std::size_t> labels) {
  if (labels.size() != probs.rows()) {
    throw std::invalid_argument("label count differs from probability rows");
  }
  if (labels.empty()) throw std::invalid_argument("empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= probs.cols()) throw std::out_of_range("label out of range");
    const double p = probs(i, labels[i]);
    if (!(p > 0.0)) {
      throw std::domain_error("non-finite loss: true-class probability is 0 at row " +
                              std::to_string(i));
    }
    total -= std::log(p);
  }
  return total / static_cast<double>(labels.size());
}

AptHead::AptHead(const HeadConfig& cfg, const NetworkShape& shape, Rng& rng,
                 std::optional<NetworkInit> init)
    : cfg_(cfg), shape_(shape) {
  validate(cfg);
  validate(shape);
  NetworkInit net_init;
  if (init) {
    net_init = *init;
  } else {
    net_init.final = FinalInit::kZeroScale;
    net_init.final_shift = cfg.fusion == Fusion::kMultiply ? 1.0 : 0.0;
  }
  const std::size_t used = (cfg.use_ocr ? 1 : 0) + (cfg.use_vision ? 1 : 0);
  const std::size_t count = used == 0 ? 0 : (cfg.share_weights ? 1 : used);
  for (std::size_t k = 0; k < count; ++k) nets_.emplace_back(shape, rng, net_init);

  if (cfg.fusion == Fusion::kAttention) {
    const auto p = prompt_side(cfg).size();
    const auto v = vision_side(cfg).size();
    if (p > 0) prompt_map_ = sum_like_fusion(shape.dim, p);
    if (v > 0) vision_map_ = sum_like_fusion(shape.dim, v);
  }
}

std::optional<std::size_t> AptHead::ocr_network_index() const {
  if (!cfg_.use_ocr) return std::nullopt;
  return 0;
}

std::optional<std::size_t> AptHead::vision_network_index() const {
  if (!cfg_.use_vision) return std::nullopt;
  return (cfg_.share_weights || !cfg_.use_ocr) ? 0 : 1;
}

struct AptHead::Pass {
  Matrix ocr_offsets;     // n x d, zero when unused
  Matrix vision_offsets;  // n x d, zero when unused
  std::vector<NetworkTrace> traces;
  bool stacked = false;  // shared phi ran once on [ocr; vision]

  Matrix prompt_base;   // m x d: t_j, or W_t t_j for attention
  Matrix prompt_shift;  // n x d: additive or multiplicative per-proposal term
  bool multiplicative = false;
  Matrix vision_tuned;  // n x d
  Matrix logits;        // n x m
  Matrix probs;         // n x m
};

AptHead::Pass AptHead::run(const CategoryPrompts& prompts,
                           const ProposalBatch& batch, Mode mode,
                           bool keep_traces) const {
  const std::size_t d = shape_.dim;
  check_dims(prompts, batch, d);
  const std::size_t n = batch.size();
  const std::size_t m = prompts.size();

  Pass pass;
  pass.ocr_offsets = Matrix(n, d);
  pass.vision_offsets = Matrix(n, d);
  pass.traces.resize(nets_.size());
  auto trace = [&](std::size_t k) -> NetworkTrace* {
    return keep_traces ? &pass.traces[k] : nullptr;
  };

  const auto oi = ocr_network_index();
  const auto vi = vision_network_index();
  if (oi && vi && *oi == *vi) {
    // Shared phi: both modalities form one batch for normalization.
    pass.stacked = true;
    Matrix stacked(2 * n, d);
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(batch.ocr.row(i).begin(), d, stacked.row(i).begin());
      std::copy_n(batch.vision.row(i).begin(), d, stacked.row(n + i).begin());
    }
    Matrix out = nets_[*oi].forward(stacked, mode, trace(*oi));
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(out.row(i).begin(), d, pass.ocr_offsets.row(i).begin());
      std::copy_n(out.row(n + i).begin(), d, pass.vision_offsets.row(i).begin());
    }
  } else {
    if (oi) pass.ocr_offsets = nets_[*oi].forward(batch.ocr, mode, trace(*oi));
    if (vi) pass.vision_offsets = nets_[*vi].forward(batch.vision, mode, trace(*vi));
  }

  auto offset_row = [&](Offset which, std::size_t i) -> std::span<const double> {
    return which == Offset::kOcr ? pass.ocr_offsets.row(i)
                                 : pass.vision_offsets.row(i);
  };
  const auto p_side = prompt_side(cfg_);
  const auto v_side = vision_side(cfg_);

  // Prompt side as base_j (+ or *) shift_i.
  pass.multiplicative = cfg_.fusion == Fusion::kMultiply && !p_side.empty();
  pass.prompt_base = Matrix(m, d);
  pass.prompt_shift = Matrix(n, d, pass.multiplicative ? 1.0 : 0.0);
  const bool p_attention = cfg_.fusion == Fusion::kAttention && !p_side.empty();
  for (std::size_t j = 0; j < m; ++j) {
    auto t = prompts.vectors.row(j);
    auto dst = pass.prompt_base.row(j);
    if (p_attention) {
      for (std::size_t r = 0; r < d; ++r) {
        dst[r] = dot(prompt_map_->weight.row(r).subspan(0, d), t);
      }
    } else {
      std::copy(t.begin(), t.end(), dst.begin());
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto shift = pass.prompt_shift.row(i);
    for (std::size_t k = 0; k < p_side.size(); ++k) {
      auto u = offset_row(p_side[k], i);
      if (p_attention) {
        for (std::size_t r = 0; r < d; ++r) {
          shift[r] += dot(prompt_map_->weight.row(r).subspan((k + 1) * d, d), u);
        }
      } else if (pass.multiplicative) {
        for (std::size_t c = 0; c < d; ++c) shift[c] *= u[c];
      } else {
        for (std::size_t c = 0; c < d; ++c) shift[c] += u[c];
      }
    }
    if (p_attention) {
      for (std::size_t r = 0; r < d; ++r) shift[r] += prompt_map_->bias[r];
    }
  }

  pass.vision_tuned = Matrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::span<const double>> parts;
    for (Offset k : v_side) parts.push_back(offset_row(k, i));
    auto fused = fuse(cfg_.fusion, batch.vision.row(i), parts,
                      vision_map_ ? &*vision_map_ : nullptr);
    std::copy(fused.begin(), fused.end(), pass.vision_tuned.row(i).begin());
  }

  pass.logits = Matrix(n, m);
  pass.probs = Matrix(n, m);
  std::vector<double> tuned(d);
  for (std::size_t i = 0; i < n; ++i) {
    auto fh = pass.vision_tuned.row(i);
    const double nf = norm(fh);
    auto shift = pass.prompt_shift.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      auto base = pass.prompt_base.row(j);
      for (std::size_t c = 0; c < d; ++c) {
        tuned[c] = pass.multiplicative ? base[c] * shift[c] : base[c] + shift[c];
      }
      const double nt = norm(tuned);
      if (nt == 0.0 || nf == 0.0) zero_norm(i, j);
      pass.logits(i, j) = dot(tuned, fh) / (nt * nf) / cfg_.tau;
    }
    softmax_row(pass.logits.row(i), pass.probs.row(i));
  }
  return pass;
}

Matrix AptHead::predict(const CategoryPrompts& prompts, const ProposalBatch& batch,
                        Mode mode) const {
  return run(prompts, batch, mode, false).probs;
}

std::pair<std::vector<double>, std::vector<double>> AptHead::offsets(
    std::span<const double> f, std::span<const double> ocr_embedding) const {
  if (f.size() != shape_.dim || ocr_embedding.size() != shape_.dim) {
    throw std::invalid_argument("offsets: dimension mismatch");
  }
  std::vector<double> o(shape_.dim, 0.0), v(shape_.dim, 0.0);
  if (auto k = ocr_network_index()) o = nets_[*k].forward(ocr_embedding);
  if (auto k = vision_network_index()) v = nets_[*k].forward(f);
  return {std::move(o), std::move(v)};
}

TunedPair AptHead::tune_pair(std::span<const double> t, std::span<const double> f,
                             std::span<const double> ocr_embedding) const {
  if (t.size() != shape_.dim) throw std::invalid_argument("tune: dimension mismatch");
  auto [o, v] = offsets(f, ocr_embedding);
  return tune_with_offsets(cfg_, t, f, o, v, prompt_map_ ? &*prompt_map_ : nullptr,
                           vision_map_ ? &*vision_map_ : nullptr);
}

AptHead::StepResult AptHead::loss_and_gradients(const CategoryPrompts& prompts,
                                                const ProposalBatch& batch,
                                                ParameterGrads& grads, Mode mode,
                                                double scale) const {
  if (batch.labels.size() != batch.size()) {
    throw std::invalid_argument("training batch needs one label per proposal");
  }
  for (std::size_t y : batch.labels) {
    if (y >= prompts.size()) throw std::out_of_range("label out of range");
  }
  Pass pass = run(prompts, batch, mode, true);
  const std::size_t d = shape_.dim;
  const std::size_t n = batch.size();
  const std::size_t m = prompts.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  StepResult result;
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto z = pass.logits.row(i);
    const double mx = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - mx);
    loss += mx + std::log(s) - z[batch.labels[i]];
  }
  result.loss = loss * inv_n;
  if (!std::isfinite(result.loss)) throw std::domain_error("non-finite loss");

  // Cosine layer.
  Matrix d_shift(n, d);        // d loss / d prompt_shift_i
  Matrix d_base(m, d);         // d loss / d prompt_base_j
  Matrix d_vision_tuned(n, d);  // d loss / d f_hat_i
  std::vector<double> tuned(d);
  for (std::size_t i = 0; i < n; ++i) {
    auto fh = pass.vision_tuned.row(i);
    const double nf = norm(fh);
    auto shift = pass.prompt_shift.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      auto base = pass.prompt_base.row(j);
      for (std::size_t c = 0; c < d; ++c) {
        tuned[c] = pass.multiplicative ? base[c] * shift[c] : base[c] + shift[c];
      }
      const double nt = norm(tuned);
      const double cosine = pass.logits(i, j) * cfg_.tau;
      const double target = batch.labels[i] == j ? 1.0 : 0.0;
      const double g = scale * (pass.probs(i, j) - target) * inv_n / cfg_.tau;
      const double inv_prod = 1.0 / (nt * nf);
      for (std::size_t c = 0; c < d; ++c) {
        const double da = g * (fh[c] * inv_prod - cosine * tuned[c] / (nt * nt));
        const double db = g * (tuned[c] * inv_prod - cosine * fh[c] / (nf * nf));
        d_vision_tuned(i, c) += db;
        if (pass.multiplicative) {
          d_shift(i, c) += da * base[c];
        } else {
          d_shift(i, c) += da;
          d_base(j, c) += da;
        }
      }
    }
  }

  // Fusion layers back to the offsets.
  const std::size_t n_net_blocks = [&] {
    std::size_t k = 0;
    for (const auto& net : nets_) k += net.parameters().size();
    return k;
  }();
  std::size_t map_block = n_net_blocks;
  Matrix d_ocr(n, d), d_vis(n, d);
  auto d_offset = [&](Offset which, std::size_t i) -> std::span<double> {
    return which == Offset::kOcr ? d_ocr.row(i) : d_vis.row(i);
  };
  auto offset_row = [&](Offset which, std::size_t i) -> std::span<const double> {
    return which == Offset::kOcr ? pass.ocr_offsets.row(i)
                                 : pass.vision_offsets.row(i);
  };

  // `upstream` is the gradient at the fused vector of one proposal; `base`
  // the vector the offsets were fused into.
  auto fuse_backward = [&](const std::vector<Offset>& side, std::size_t i,
                           std::span<const double> upstream,
                           std::span<const double> base,
                           const AttentionFusion* map, std::size_t block,
                           bool include_base_weight) {
    switch (cfg_.fusion) {
      case Fusion::kSum:
        for (Offset k : side) {
          auto g = d_offset(k, i);
          for (std::size_t c = 0; c < d; ++c) g[c] += upstream[c];
        }
        break;
      case Fusion::kMultiply:
        for (std::size_t k = 0; k < side.size(); ++k) {
          auto g = d_offset(side[k], i);
          for (std::size_t c = 0; c < d; ++c) {
            double others = base.empty() ? 1.0 : base[c];
            for (std::size_t l = 0; l < side.size(); ++l) {
              if (l != k) others *= offset_row(side[l], i)[c];
            }
            g[c] += upstream[c] * others;
          }
        }
        break;
      case Fusion::kAttention: {
        auto& gw = grads[block];
        auto& gb = grads[block + 1];
        const std::size_t cols = map->weight.cols();
        for (std::size_t r = 0; r < d; ++r) {
          const double u = upstream[r];
          if (u == 0.0) continue;
          gb[r] += u;
          double* row = gw.data() + r * cols;
          if (include_base_weight) {
            for (std::size_t c = 0; c < d; ++c) row[c] += u * base[c];
          }
          for (std::size_t k = 0; k < side.size(); ++k) {
            auto x = offset_row(side[k], i);
            auto w = map->weight.row(r).subspan((k + 1) * d, d);
            auto g = d_offset(side[k], i);
            for (std::size_t c = 0; c < d; ++c) {
              row[(k + 1) * d + c] += u * x[c];
              g[c] += u * w[c];
            }
          }
        }
        break;
      }
    }
  };

  const auto p_side = prompt_side(cfg_);
  const auto v_side = vision_side(cfg_);
  if (!p_side.empty()) {
    const AttentionFusion* map = prompt_map_ ? &*prompt_map_ : nullptr;
    for (std::size_t i = 0; i < n; ++i) {
      // The per-category base t_j enters the product separately, so the
      // multiplicative shift gradient already carries it.
      fuse_backward(p_side, i, d_shift.row(i), {}, map, map_block, false);
    }
    if (map != nullptr) {
      auto& gw = grads[map_block];
      const std::size_t cols = map->weight.cols();
      for (std::size_t j = 0; j < m; ++j) {
        auto t = prompts.vectors.row(j);
        for (std::size_t r = 0; r < d; ++r) {
          const double u = d_base(j, r);
          double* row = gw.data() + r * cols;
          for (std::size_t c = 0; c < d; ++c) row[c] += u * t[c];
        }
      }
      map_block += 2;
    }
  }
  if (!v_side.empty()) {
    const AttentionFusion* map = vision_map_ ? &*vision_map_ : nullptr;
    for (std::size_t i = 0; i < n; ++i) {
      fuse_backward(v_side, i, d_vision_tuned.row(i), batch.vision.row(i), map,
                    map_block, true);
    }
  }

  // Through phi.
  std::size_t net_block = 0;
  std::vector<std::size_t> net_offsets;
  for (const auto& net : nets_) {
    net_offsets.push_back(net_block);
    net_block += net.parameters().size();
  }
  auto net_grads = [&](std::size_t k, auto&& fn) {
    ParameterGrads local = nets_[k].zero_grads();
    fn(local);
    for (std::size_t b = 0; b < local.size(); ++b) {
      auto& dst = grads[net_offsets[k] + b];
      for (std::size_t c = 0; c < local[b].size(); ++c) dst[c] += local[b][c];
    }
  };
  const auto oi = ocr_network_index();
  const auto vi = vision_network_index();
  if (pass.stacked) {
    Matrix upstream(2 * n, d);
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(d_ocr.row(i).begin(), d, upstream.row(i).begin());
      std::copy_n(d_vis.row(i).begin(), d, upstream.row(n + i).begin());
    }
    net_grads(*oi, [&](ParameterGrads& g) {
      nets_[*oi].backward(pass.traces[*oi], upstream, g);
    });
  } else {
    if (oi) {
      net_grads(*oi, [&](ParameterGrads& g) {
        nets_[*oi].backward(pass.traces[*oi], d_ocr, g);
      });
    }
    if (vi) {
      net_grads(*vi, [&](ParameterGrads& g) {
        nets_[*vi].backward(pass.traces[*vi], d_vis, g);
      });
    }
  }

  result.traces = std::move(pass.traces);
  return result;
}

void AptHead::update_running_statistics(const StepResult& step) {
  for (std::size_t k = 0; k < nets_.size(); ++k) {
    nets_[k].update_running_statistics(step.traces[k]);
  }
}

std::vector<std::span<double>> AptHead::parameters() {
  std::vector<std::span<double>> out;
  for (auto& net : nets_) {
    for (auto p : net.parameters()) out.push_back(p);
  }
  for (auto* map : {&prompt_map_, &vision_map_}) {
    if (*map) {
      out.emplace_back((*map)->weight.values());
      out.emplace_back((*map)->bias);
    }
  }
  return out;
}

std::vector<std::span<const double>> AptHead::parameters() const {
  std::vector<std::span<const double>> out;
  for (const auto& net : nets_) {
    for (auto p : net.parameters()) out.push_back(p);
  }
  for (const auto* map : {&prompt_map_, &vision_map_}) {
    if (*map) {
      out.emplace_back((*map)->weight.values());
      out.emplace_back((*map)->bias);
    }
  }
  return out;
}

ParameterGrads AptHead::zero_grads() const {
  ParameterGrads g;
  for (const auto& p : parameters()) g.emplace_back(p.size(), 0.0);
  return g;
}

}  // namespace apt
