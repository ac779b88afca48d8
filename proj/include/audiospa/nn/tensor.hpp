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
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "audiospa/common.hpp"

namespace audiospa::nn {

// Dense row-major tensor. Shapes are fixed at construction; this is a data
// container, not an expression library — layers index it directly.
template <typename Real>
struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<Real> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::int64_t> s) : shape(std::move(s)) {
    data.assign(static_cast<std::size_t>(numel_of(shape)), Real(0));
  }

  static std::int64_t numel_of(const std::vector<std::int64_t>& s) {
    std::int64_t n = 1;
    for (auto d : s) n *= d;
    return n;
  }

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  std::int64_t dim(std::size_t i) const { return shape.at(i); }

  Real* ptr() { return data.data(); }
  const Real* ptr() const { return data.data(); }

  Real& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
  Real operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }

  Real& operator()(std::int64_t i, std::int64_t j) { return data[static_cast<std::size_t>(i * shape[1] + j)]; }
  Real operator()(std::int64_t i, std::int64_t j) const {
    return data[static_cast<std::size_t>(i * shape[1] + j)];
  }
  Real& operator()(std::int64_t i, std::int64_t j, std::int64_t k) {
    return data[static_cast<std::size_t>((i * shape[1] + j) * shape[2] + k)];
  }
  Real operator()(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return data[static_cast<std::size_t>((i * shape[1] + j) * shape[2] + k)];
  }

  void zero() { std::fill(data.begin(), data.end(), Real(0)); }
  void fill(Real v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  bool all_finite() const {
    for (Real v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }
};

template <typename Real>
struct Param {
  std::string name;
  Tensor<Real>* value = nullptr;
  Tensor<Real>* grad = nullptr;
};

template <typename Real>
using ParamList = std::vector<Param<Real>>;

// Dot product with fixed-width partial sums. The blocked accumulation gives
// the compiler independent lanes to vectorize while keeping a fixed summation
// order, so results stay run-to-run identical.
template <typename Real>
Real dot_strided(const Real* __restrict a, const Real* __restrict b, std::int64_t n) {
  constexpr std::int64_t kLanes = 16;
  Real acc[kLanes] = {};
  std::int64_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (std::int64_t k = 0; k < kLanes; ++k) acc[k] += a[i + k] * b[i + k];
  Real tail = 0;
  for (; i < n; ++i) tail += a[i] * b[i];
  Real s = tail;
  for (std::int64_t k = 0; k < kLanes; ++k) s += acc[k];
  return s;
}

template <typename Real>
Real sum_strided(const Real* __restrict a, std::int64_t n) {
  constexpr std::int64_t kLanes = 16;
  Real acc[kLanes] = {};
  std::int64_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (std::int64_t k = 0; k < kLanes; ++k) acc[k] += a[i + k];
  Real tail = 0;
  for (; i < n; ++i) tail += a[i];
  Real s = tail;
  for (std::int64_t k = 0; k < kLanes; ++k) s += acc[k];
  return s;
}

// C[M,N] += A[M,K] * B[K,N]
template <typename Real>
void gemm_nn(std::int64_t M, std::int64_t N, std::int64_t K, const Real* A, const Real* B, Real* C) {
#pragma omp parallel for schedule(static) if (M * N * K > (1 << 16))
  for (std::int64_t m = 0; m < M; ++m) {
    Real* __restrict crow = C + m * N;
    for (std::int64_t k = 0; k < K; ++k) {
      const Real a = A[m * K + k];
      const Real* __restrict brow = B + k * N;
      for (std::int64_t n = 0; n < N; ++n) crow[n] += a * brow[n];
    }
  }
}

// C[M,N] += A[K,M]^T * B[K,N]
template <typename Real>
void gemm_tn(std::int64_t M, std::int64_t N, std::int64_t K, const Real* A, const Real* B, Real* C) {
#pragma omp parallel for schedule(static) if (M * N * K > (1 << 16))
  for (std::int64_t m = 0; m < M; ++m) {
    Real* __restrict crow = C + m * N;
    for (std::int64_t k = 0; k < K; ++k) {
      const Real a = A[k * M + m];
      const Real* __restrict brow = B + k * N;
      for (std::int64_t n = 0; n < N; ++n) crow[n] += a * brow[n];
    }
  }
}

// C[M,N] += A[M,K] * B[N,K]^T
template <typename Real>
void gemm_nt(std::int64_t M, std::int64_t N, std::int64_t K, const Real* A, const Real* B, Real* C) {
#pragma omp parallel for schedule(static) if (M * N * K > (1 << 16))
  for (std::int64_t m = 0; m < M; ++m) {
    const Real* __restrict arow = A + m * K;
    for (std::int64_t n = 0; n < N; ++n) C[m * N + n] += dot_strided(arow, B + n * K, K);
  }
}

}  // namespace audiospa::nn
