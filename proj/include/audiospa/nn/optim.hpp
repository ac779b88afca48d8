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

#include <cmath>
#include <vector>

#include "audiospa/nn/tensor.hpp"

namespace audiospa::nn {

// Adam with decoupled weight decay. Moment buffers align with the parameter
// list order, which is fixed by each model's collect() traversal.
template <typename Real>
class AdamW {
 public:
  explicit AdamW(const ParamList<Real>& params, double weight_decay = 1e-2, double beta1 = 0.9,
                 double beta2 = 0.999, double eps = 1e-8)
      : weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& p : params) {
      m_.emplace_back(p.value->shape);
      v_.emplace_back(p.value->shape);
    }
  }

  void step(const ParamList<Real>& params, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor<Real>& w = *params[i].value;
      Tensor<Real>& g = *params[i].grad;
      Tensor<Real>& m = m_[i];
      Tensor<Real>& v = v_[i];
      for (std::int64_t j = 0; j < w.numel(); ++j) {
        const double gj = static_cast<double>(g[j]);
        const double mj = beta1_ * static_cast<double>(m[j]) + (1.0 - beta1_) * gj;
        const double vj = beta2_ * static_cast<double>(v[j]) + (1.0 - beta2_) * gj * gj;
        m[j] = static_cast<Real>(mj);
        v[j] = static_cast<Real>(vj);
        const double update = (mj / bc1) / (std::sqrt(vj / bc2) + eps_) + weight_decay_ * static_cast<double>(w[j]);
        w[j] = static_cast<Real>(static_cast<double>(w[j]) - lr * update);
      }
    }
  }

  std::int64_t steps() const { return t_; }

 private:
  double weight_decay_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<Tensor<Real>> m_, v_;
};

template <typename Real>
void zero_grads(const ParamList<Real>& params) {
  for (const auto& p : params) p.grad->zero();
}

template <typename Real>
void scale_grads(const ParamList<Real>& params, double s) {
  for (const auto& p : params)
    for (auto& g : p.grad->data) g = static_cast<Real>(static_cast<double>(g) * s);
}

// Rescales gradients to the given global L2 norm when exceeded; returns the
// pre-clip norm. max_norm <= 0 disables clipping.
template <typename Real>
double clip_global_norm(const ParamList<Real>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    for (const auto& g : p.grad->data) sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    scale_grads(params, s);
  }
  return norm;
}

}  // namespace audiospa::nn
