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
#include <span>
#include <vector>

#include "apt/matrix.hpp"
#include "apt/rng.hpp"

namespace apt {

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

enum class Mode { kTrain, kEval };

struct NetworkShape {
  std::size_t dim = 0;
  std::size_t reduction = 16;
  std::size_t layers = 2;  // 2 or 3 bottlenecks

  std::size_t hidden() const { return dim / reduction; }
  bool operator==(const NetworkShape&) const = default;
};

// Throws std::invalid_argument unless dim > 0, reduction divides dim and
// layers is 2 or 3.
void validate(const NetworkShape& shape);

// fc -> batch norm -> relu.
struct Bottleneck {
  Matrix weight;  // out x in
  std::vector<double> bias;
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;

  std::size_t in() const { return weight.cols(); }
  std::size_t out() const { return weight.rows(); }
  bool operator==(const Bottleneck&) const = default;
};

// How the last bottleneck starts. All fc layers before it use fan-in scaled
// uniform weights and biases.
enum class FinalInit {
  // Random fc, batch-norm scale 0: output is exactly the shift at start and
  // the scale grows from 0 under training.
  kZeroScale,
  // Zero fc weight and bias, batch-norm scale 1.
  kZeroWeights,
  // Random fc, batch-norm scale 1.
  kRandom,
};

struct NetworkInit {
  FinalInit final = FinalInit::kZeroScale;
  // Initial batch-norm shift of the last bottleneck. 1 makes the output an
  // all-ones vector at start, the identity for multiplicative fusion.
  double final_shift = 0.0;
};

// Activations kept by a forward pass for the backward pass.
struct NetworkTrace {
  struct Layer {
    Matrix input;
    Matrix normalized;  // x_hat
    Matrix activated;   // gamma * x_hat + beta, before relu
    std::vector<double> mean;
    std::vector<double> var;  // biased batch variance (train mode)
    std::vector<double> inv_std;
  };
  Mode mode = Mode::kEval;
  std::vector<Layer> layers;
};

// Gradient buffers laid out like AptNetwork::parameters().
using ParameterGrads = std::vector<std::vector<double>>;

// The bottleneck stack phi: dim -> dim/r [-> dim/r] -> dim.
class AptNetwork {
 public:
  AptNetwork() = default;
  AptNetwork(const NetworkShape& shape, Rng& rng, NetworkInit init = {});

  const NetworkShape& shape() const { return shape_; }
  const std::vector<Bottleneck>& layers() const { return layers_; }
  std::vector<Bottleneck>& layers() { return layers_; }

  // Trainable parameters only (weights, biases, gamma, beta).
  std::size_t param_count() const;

  // Rows of `x` are samples. Train mode normalizes with batch statistics
  // and needs at least two rows; eval mode uses running statistics. Running
  // statistics are not touched here, see update_running_statistics().
  Matrix forward(const Matrix& x, Mode mode, NetworkTrace* trace = nullptr) const;
  std::vector<double> forward(std::span<const double> x) const;

  // Folds the batch statistics of a train-mode trace into the running
  // estimates (momentum 0.1, unbiased variance).
  void update_running_statistics(const NetworkTrace& trace);

  // Accumulates d(loss)/d(params) into `grads` and returns d(loss)/d(input).
  Matrix backward(const NetworkTrace& trace, const Matrix& grad_output,
                  ParameterGrads& grads) const;

  // Order per layer: weight, bias, gamma, beta.
  std::vector<std::span<double>> parameters();
  std::vector<std::span<const double>> parameters() const;
  ParameterGrads zero_grads() const;

  bool operator==(const AptNetwork&) const = default;

 private:
  NetworkShape shape_;
  std::vector<Bottleneck> layers_;
};

// Closed-form trainable parameter count for a shape.
std::size_t param_count(const NetworkShape& shape);

}  // namespace apt
