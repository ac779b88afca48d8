// Copyright 2026 The AudioSpa Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>

#include "audiospa/nn/tensor.hpp"

namespace audiospa::nn {

// Mean absolute error over all elements.
template <typename Real>
double l1_loss(const Tensor<Real>& pred, const Tensor<Real>& target) {
  if (!pred.same_shape(target)) throw DomainError("l1_loss: shape mismatch");
  if (pred.numel() == 0) throw DomainError("l1_loss: empty tensors");
  double s = 0.0;
  for (std::int64_t i = 0; i < pred.numel(); ++i) s += std::abs(static_cast<double>(pred[i] - target[i]));
  return s / static_cast<double>(pred.numel());
}

// Subgradient of mean L1; zero at exact ties.
template <typename Real>
Tensor<Real> l1_loss_grad(const Tensor<Real>& pred, const Tensor<Real>& target) {
  Tensor<Real> g(pred.shape);
  const Real inv = Real(1) / static_cast<Real>(pred.numel());
  for (std::int64_t i = 0; i < pred.numel(); ++i) {
    const Real d = pred[i] - target[i];
    g[i] = d > Real(0) ? inv : (d < Real(0) ? -inv : Real(0));
  }
  return g;
}

// Smooth-L1 with transition delta; tends to L1 as delta -> 0. Used by the
// finite-difference check, which needs a differentiable objective.
template <typename Real>
double huber_loss(const Tensor<Real>& pred, const Tensor<Real>& target, double delta) {
  if (!pred.same_shape(target)) throw DomainError("huber_loss: shape mismatch");
  double s = 0.0;
  for (std::int64_t i = 0; i < pred.numel(); ++i) {
    const double r = std::abs(static_cast<double>(pred[i] - target[i]));
    s += (r < delta) ? r * r / (2.0 * delta) : r - delta / 2.0;
  }
  return s / static_cast<double>(pred.numel());
}

template <typename Real>
Tensor<Real> huber_loss_grad(const Tensor<Real>& pred, const Tensor<Real>& target, double delta) {
  Tensor<Real> g(pred.shape);
  const double inv = 1.0 / static_cast<double>(pred.numel());
  for (std::int64_t i = 0; i < pred.numel(); ++i) {
    const double r = static_cast<double>(pred[i] - target[i]);
    const double d = (std::abs(r) < delta) ? r / delta : (r > 0 ? 1.0 : -1.0);
    g[i] = static_cast<Real>(d * inv);
  }
  return g;
}

constexpr double kBceEpsilon = 1e-7;

// Summed binary cross-entropy over a multi-hot target; probabilities are
// clamped to [eps, 1-eps] so the loss is total.
template <typename Real>
double bce_loss(const Tensor<Real>& prob, const Tensor<Real>& target) {
  if (!prob.same_shape(target)) throw DomainError("bce_loss: shape mismatch");
  double s = 0.0;
  for (std::int64_t i = 0; i < prob.numel(); ++i) {
    const double p = std::clamp(static_cast<double>(prob[i]), kBceEpsilon, 1.0 - kBceEpsilon);
    const double t = static_cast<double>(target[i]);
    s -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
  }
  return s;
}

}  // namespace audiospa::nn
