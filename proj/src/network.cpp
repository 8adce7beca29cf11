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
#include "apt/network.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace apt {

void validate(const NetworkShape& shape) {
  if (shape.dim == 0) throw std::invalid_argument("network dim must be positive");
  if (shape.reduction == 0 || shape.dim % shape.reduction != 0) {
    throw std::invalid_argument("reduction " + std::to_string(shape.reduction) +
                                " does not divide dim " +
                                std::to_string(shape.dim));
  }
  if (shape.layers != 2 && shape.layers != 3) {
    throw std::invalid_argument("network must have 2 or 3 bottlenecks");
  }
}

std::size_t param_count(const NetworkShape& shape) {
  validate(shape);
  const std::size_t d = shape.dim;
  const std::size_t h = shape.hidden();
  // fc weights + fc bias + bn gamma/beta for each bottleneck.
  std::size_t total = (d * h + h) + 2 * h;
  if (shape.layers == 3) total += (h * h + h) + 2 * h;
  total += (h * d + d) + 2 * d;
  return total;
}

AptNetwork::AptNetwork(const NetworkShape& shape, Rng& rng, NetworkInit init)
    : shape_(shape) {
  validate(shape);
  std::vector<std::size_t> widths = {shape.dim, shape.hidden()};
  if (shape.layers == 3) widths.push_back(shape.hidden());
  widths.push_back(shape.dim);

  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    const std::size_t in = widths[k];
    const std::size_t out = widths[k + 1];
    const bool last = k + 2 == widths.size();
    Bottleneck b;
    b.weight = Matrix(out, in);
    b.bias.assign(out, 0.0);
    if (!(last && init.final == FinalInit::kZeroWeights)) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      for (double& w : b.weight.values()) w = rng.uniform(-bound, bound);
      for (double& v : b.bias) v = rng.uniform(-bound, bound);
    }
    b.gamma.assign(out, last && init.final == FinalInit::kZeroScale ? 0.0 : 1.0);
    b.beta.assign(out, last ? init.final_shift : 0.0);
    b.running_mean.assign(out, 0.0);
    b.running_var.assign(out, 1.0);
    layers_.push_back(std::move(b));
  }
}

std::size_t AptNetwork::param_count() const {
  std::size_t total = 0;
  for (const auto& p : parameters()) total += p.size();
  return total;
}

Matrix AptNetwork::forward(const Matrix& x, Mode mode, NetworkTrace* trace) const {
  if (x.cols() != shape_.dim) {
    throw std::invalid_argument("network input has dim " +
                                std::to_string(x.cols()) + ", expected " +
                                std::to_string(shape_.dim));
  }
  const std::size_t n = x.rows();
  if (mode == Mode::kTrain && n < 2) {
    throw std::invalid_argument(
        "train-mode batch needs at least 2 rows for batch statistics");
  }
  if (trace != nullptr) {
    trace->mode = mode;
    trace->layers.clear();
  }

  Matrix h = x;
  for (const Bottleneck& b : layers_) {
    Matrix z(n, b.out());
    for (std::size_t i = 0; i < n; ++i) {
      auto in = h.row(i);
      for (std::size_t o = 0; o < b.out(); ++o) {
        z(i, o) = dot(b.weight.row(o), in) + b.bias[o];
      }
    }

    std::vector<double> mean(b.out()), var(b.out()), inv_std(b.out());
    for (std::size_t o = 0; o < b.out(); ++o) {
      if (mode == Mode::kTrain) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += z(i, o);
        mean[o] = s / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double c = z(i, o) - mean[o];
          ss += c * c;
        }
        var[o] = ss / static_cast<double>(n);
      } else {
        mean[o] = b.running_mean[o];
        var[o] = b.running_var[o];
      }
      inv_std[o] = 1.0 / std::sqrt(var[o] + kBatchNormEpsilon);
    }

    Matrix normalized(n, b.out()), activated(n, b.out()), out(n, b.out());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t o = 0; o < b.out(); ++o) {
        normalized(i, o) = (z(i, o) - mean[o]) * inv_std[o];
        activated(i, o) = b.gamma[o] * normalized(i, o) + b.beta[o];
        out(i, o) = activated(i, o) > 0.0 ? activated(i, o) : 0.0;
      }
    }
    if (trace != nullptr) {
      trace->layers.push_back({std::move(h), std::move(normalized),
                               std::move(activated), std::move(mean),
                               std::move(var), std::move(inv_std)});
    }
    h = std::move(out);
  }
  return h;
}

std::vector<double> AptNetwork::forward(std::span<const double> x) const {
  Matrix m(1, x.size());
  std::copy(x.begin(), x.end(), m.values().begin());
  Matrix y = forward(m, Mode::kEval);
  return {y.values().begin(), y.values().end()};
}

void AptNetwork::update_running_statistics(const NetworkTrace& trace) {
  if (trace.mode != Mode::kTrain) return;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    Bottleneck& b = layers_[k];
    const auto& t = trace.layers[k];
    const double n = static_cast<double>(t.input.rows());
    for (std::size_t o = 0; o < b.out(); ++o) {
      const double unbiased = t.var[o] * n / (n - 1.0);
      b.running_mean[o] = (1.0 - kBatchNormMomentum) * b.running_mean[o] +
                          kBatchNormMomentum * t.mean[o];
      b.running_var[o] = (1.0 - kBatchNormMomentum) * b.running_var[o] +
                         kBatchNormMomentum * unbiased;
    }
  }
}

Matrix AptNetwork::backward(const NetworkTrace& trace, const Matrix& grad_output,
                            ParameterGrads& grads) const {
  Matrix upstream = grad_output;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const Bottleneck& b = layers_[k];
    const auto& t = trace.layers[k];
    const std::size_t n = t.input.rows();
    auto& g_weight = grads[4 * k];
    auto& g_bias = grads[4 * k + 1];
    auto& g_gamma = grads[4 * k + 2];
    auto& g_beta = grads[4 * k + 3];

    // The relu derivative at exactly 0 is taken as 1, so a zero-initialized
    // last layer still receives gradient.
    Matrix dz(n, b.out());
    for (std::size_t o = 0; o < b.out(); ++o) {
      double sum_dxhat = 0.0;
      double sum_dxhat_xhat = 0.0;
      std::vector<double> dxhat(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double dy = t.activated(i, o) >= 0.0 ? upstream(i, o) : 0.0;
        g_gamma[o] += dy * t.normalized(i, o);
        g_beta[o] += dy;
        dxhat[i] = dy * b.gamma[o];
        sum_dxhat += dxhat[i];
        sum_dxhat_xhat += dxhat[i] * t.normalized(i, o);
      }
      if (trace.mode == Mode::kTrain) {
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
          dz(i, o) = t.inv_std[o] * (dxhat[i] - inv_n * sum_dxhat -
                                     t.normalized(i, o) * inv_n * sum_dxhat_xhat);
        }
      } else {
        for (std::size_t i = 0; i < n; ++i) dz(i, o) = t.inv_std[o] * dxhat[i];
      }
    }

    Matrix dx(n, b.in());
    for (std::size_t i = 0; i < n; ++i) {
      auto in = t.input.row(i);
      auto dxi = dx.row(i);
      for (std::size_t o = 0; o < b.out(); ++o) {
        const double g = dz(i, o);
        if (g == 0.0) continue;
        g_bias[o] += g;
        auto w = b.weight.row(o);
        double* gw = g_weight.data() + o * b.in();
        for (std::size_t c = 0; c < b.in(); ++c) {
          gw[c] += g * in[c];
          dxi[c] += g * w[c];
        }
      }
    }
    upstream = std::move(dx);
  }
  return upstream;
}

std::vector<std::span<double>> AptNetwork::parameters() {
  std::vector<std::span<double>> out;
  for (auto& b : layers_) {
    out.emplace_back(b.weight.values());
    out.emplace_back(b.bias);
    out.emplace_back(b.gamma);
    out.emplace_back(b.beta);
  }
  return out;
}

std::vector<std::span<const double>> AptNetwork::parameters() const {
  std::vector<std::span<const double>> out;
  for (const auto& b : layers_) {
    out.emplace_back(b.weight.values());
    out.emplace_back(b.bias);
    out.emplace_back(b.gamma);
    out.emplace_back(b.beta);
  }
  return out;
}

ParameterGrads AptNetwork::zero_grads() const {
  ParameterGrads g;
  for (const auto& p : parameters()) g.emplace_back(p.size(), 0.0);
  return g;
}

}  // namespace apt
