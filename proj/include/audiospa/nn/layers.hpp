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
#include <string>
#include <vector>

#include "audiospa/nn/tensor.hpp"
#include "audiospa/rng.hpp"

namespace audiospa::nn {

// He-uniform weight init; keeps activation variance roughly constant through
// deep PReLU stacks. Biases draw from the smaller 1/sqrt(fan_in) range.
template <typename Real>
void init_uniform_fanin(Tensor<Real>& w, Tensor<Real>& b, std::int64_t fan_in, Rng& rng) {
  const double wb = std::sqrt(6.0 / static_cast<double>(fan_in));
  const double bb = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : w.data) v = static_cast<Real>(rng.uniform(-wb, wb));
  for (auto& v : b.data) v = static_cast<Real>(rng.uniform(-bb, bb));
}

// ---------------------------------------------------------------------------

template <typename Real>
struct Linear {
  std::int64_t in = 0, out = 0;
  bool has_bias = true;
  Tensor<Real> w;   // [out, in]
  Tensor<Real> b;   // [out]
  Tensor<Real> gw;
  Tensor<Real> gb;

  Linear() = default;
  Linear(std::int64_t in_dim, std::int64_t out_dim, bool bias = true)
      : in(in_dim), out(out_dim), has_bias(bias), w({out_dim, in_dim}), b({bias ? out_dim : 0}),
        gw({out_dim, in_dim}), gb({bias ? out_dim : 0}) {}

  void init(Rng& rng) { init_uniform_fanin(w, b, in, rng); }

  // x: [rows, in] -> y: [rows, out]
  Tensor<Real> forward(const Tensor<Real>& x) const {
    if (x.shape.back() != in) throw ConfigError("Linear: input width mismatch");
    const std::int64_t rows = x.numel() / in;
    Tensor<Real> y({rows, out});
    if (has_bias)
      for (std::int64_t r = 0; r < rows; ++r)
        std::copy(b.data.begin(), b.data.end(), y.ptr() + r * out);
    gemm_nt(rows, out, in, x.ptr(), w.ptr(), y.ptr());
    return y;
  }

  // Accumulates gw/gb, returns gx.
  Tensor<Real> backward(const Tensor<Real>& x, const Tensor<Real>& gy) {
    const std::int64_t rows = x.numel() / in;
    gemm_tn(out, in, rows, gy.ptr(), x.ptr(), gw.ptr());
    if (has_bias)
      for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t o = 0; o < out; ++o) gb[o] += gy[r * out + o];
    Tensor<Real> gx({rows, in});
    gemm_nn(rows, in, out, gy.ptr(), w.ptr(), gx.ptr());
    return gx;
  }

  void collect(ParamList<Real>& params, const std::string& prefix) {
    params.push_back({prefix + ".w", &w, &gw});
    if (has_bias) params.push_back({prefix + ".b", &b, &gb});
  }
};

// ---------------------------------------------------------------------------

// Single-parameter PReLU.
template <typename Real>
struct PReLU {
  Tensor<Real> a{{1}};
  Tensor<Real> ga{{1}};

  PReLU() { a[0] = Real(0.25); }

  Tensor<Real> forward(const Tensor<Real>& x) const {
    Tensor<Real> y = x;
    const Real slope = a[0];
    for (auto& v : y.data)
      if (v < Real(0)) v *= slope;
    return y;
  }

  Tensor<Real> backward(const Tensor<Real>& x, const Tensor<Real>& gy) {
    Tensor<Real> gx = gy;
    const Real slope = a[0];
    Real acc = 0;
    for (std::int64_t i = 0; i < x.numel(); ++i) {
      if (x[i] < Real(0)) {
        acc += gy[i] * x[i];
        gx[i] = gy[i] * slope;
      }
    }
    ga[0] += acc;
    return gx;
  }

  void collect(ParamList<Real>& params, const std::string& prefix) {
    params.push_back({prefix + ".a", &a, &ga});
  }
};

// ---------------------------------------------------------------------------

// 1-D convolution over [channels, time] maps with symmetric same-padding.
// Odd kernel sizes only; dilation spaces the taps.
template <typename Real>
struct Conv1d {
  std::int64_t in_ch = 0, out_ch = 0, kernel = 1, dilation = 1;
  Tensor<Real> w;  // [out_ch, in_ch, kernel]
  Tensor<Real> b;  // [out_ch]
  Tensor<Real> gw;
  Tensor<Real> gb;

  Conv1d() = default;
  Conv1d(std::int64_t in_channels, std::int64_t out_channels, std::int64_t kernel_size, std::int64_t dil = 1)
      : in_ch(in_channels), out_ch(out_channels), kernel(kernel_size), dilation(dil),
        w({out_channels, in_channels, kernel_size}), b({out_channels}),
        gw({out_channels, in_channels, kernel_size}), gb({out_channels}) {
    if (kernel % 2 == 0) throw ConfigError("Conv1d: kernel size must be odd");
  }

  void init(Rng& rng) { init_uniform_fanin(w, b, in_ch * kernel, rng); }

  // x: [in_ch, N] -> y: [out_ch, N]
  Tensor<Real> forward(const Tensor<Real>& x) const {
    if (x.dim(0) != in_ch) throw ConfigError("Conv1d: channel mismatch");
    const std::int64_t N = x.dim(1);
    const std::int64_t c = (kernel - 1) / 2;
    Tensor<Real> y({out_ch, N});
#pragma omp parallel for schedule(static) if (out_ch * in_ch * kernel * N > (1 << 16))
    for (std::int64_t o = 0; o < out_ch; ++o) {
      Real* __restrict yrow = y.ptr() + o * N;
      std::fill(yrow, yrow + N, b[o]);
      for (std::int64_t i = 0; i < in_ch; ++i) {
        const Real* __restrict xrow = x.ptr() + i * N;
        for (std::int64_t t = 0; t < kernel; ++t) {
          const Real wv = w(o, i, t);
          const std::int64_t off = (t - c) * dilation;
          const std::int64_t lo = std::max<std::int64_t>(0, -off);
          const std::int64_t hi = std::min<std::int64_t>(N, N - off);
          for (std::int64_t n = lo; n < hi; ++n) yrow[n] += wv * xrow[n + off];
        }
      }
    }
    return y;
  }

  Tensor<Real> backward(const Tensor<Real>& x, const Tensor<Real>& gy, bool need_gx = true) {
    const std::int64_t N = x.dim(1);
    const std::int64_t c = (kernel - 1) / 2;
// weight and bias gradients; each output channel's slice is independent.
#pragma omp parallel for schedule(static) if (out_ch * in_ch * kernel * N > (1 << 16))
    for (std::int64_t o = 0; o < out_ch; ++o) {
      const Real* __restrict gyrow = gy.ptr() + o * N;
      gb[o] += sum_strided(gyrow, N);
      for (std::int64_t i = 0; i < in_ch; ++i) {
        const Real* __restrict xrow = x.ptr() + i * N;
        for (std::int64_t t = 0; t < kernel; ++t) {
          const std::int64_t off = (t - c) * dilation;
          const std::int64_t lo = std::max<std::int64_t>(0, -off);
          const std::int64_t hi = std::min<std::int64_t>(N, N - off);
          if (hi > lo) gw(o, i, t) += dot_strided(gyrow + lo, xrow + lo + off, hi - lo);
        }
      }
    }
    Tensor<Real> gx;
    if (need_gx) {
      gx = Tensor<Real>({in_ch, N});
#pragma omp parallel for schedule(static) if (out_ch * in_ch * kernel * N > (1 << 16))
      for (std::int64_t i = 0; i < in_ch; ++i) {
        Real* __restrict gxrow = gx.ptr() + i * N;
        for (std::int64_t o = 0; o < out_ch; ++o) {
          const Real* __restrict gyrow = gy.ptr() + o * N;
          for (std::int64_t t = 0; t < kernel; ++t) {
            const Real wv = w(o, i, t);
            const std::int64_t off = (t - c) * dilation;
            // y[n] consumed x[n + off] => gx[m] += w * gy[m - off]
            const std::int64_t lo = std::max<std::int64_t>(0, off);
            const std::int64_t hi = std::min<std::int64_t>(N, N + off);
            for (std::int64_t m = lo; m < hi; ++m) gxrow[m] += wv * gyrow[m - off];
          }
        }
      }
    }
    return gx;
  }

  void collect(ParamList<Real>& params, const std::string& prefix) {
    params.push_back({prefix + ".w", &w, &gw});
    params.push_back({prefix + ".b", &b, &gb});
  }
};

// ---------------------------------------------------------------------------

// 3x3 stride-2 convolution over [channels, height, width], padding 1.
// Implemented as im2col + GEMM.
template <typename Real>
struct Conv2d {
  std::int64_t in_ch = 0, out_ch = 0;
  static constexpr std::int64_t kKernel = 3;
  static constexpr std::int64_t kStride = 2;
  static constexpr std::int64_t kPad = 1;
  Tensor<Real> w;  // [out_ch, in_ch*9]
  Tensor<Real> b;  // [out_ch]
  Tensor<Real> gw;
  Tensor<Real> gb;

  Conv2d() = default;
  Conv2d(std::int64_t in_channels, std::int64_t out_channels)
      : in_ch(in_channels), out_ch(out_channels), w({out_channels, in_channels * 9}), b({out_channels}),
        gw({out_channels, in_channels * 9}), gb({out_channels}) {}

  void init(Rng& rng) { init_uniform_fanin(w, b, in_ch * 9, rng); }

  static std::int64_t out_size(std::int64_t n) { return (n + 2 * kPad - kKernel) / kStride + 1; }

  Tensor<Real> im2col(const Tensor<Real>& x) const {
    const std::int64_t H = x.dim(1), W = x.dim(2);
    const std::int64_t Ho = out_size(H), Wo = out_size(W);
    Tensor<Real> cols({in_ch * 9, Ho * Wo});
    for (std::int64_t i = 0; i < in_ch; ++i) {
      for (std::int64_t ky = 0; ky < 3; ++ky) {
        for (std::int64_t kx = 0; kx < 3; ++kx) {
          Real* __restrict dst = cols.ptr() + ((i * 3 + ky) * 3 + kx) * (Ho * Wo);
          for (std::int64_t oy = 0; oy < Ho; ++oy) {
            const std::int64_t sy = oy * kStride + ky - kPad;
            for (std::int64_t ox = 0; ox < Wo; ++ox) {
              const std::int64_t sx = ox * kStride + kx - kPad;
              dst[oy * Wo + ox] =
                  (sy >= 0 && sy < H && sx >= 0 && sx < W) ? x(i, sy, sx) : Real(0);
            }
          }
        }
      }
    }
    return cols;
  }

  Tensor<Real> forward(const Tensor<Real>& x, Tensor<Real>* cols_cache = nullptr) const {
    if (x.dim(0) != in_ch) throw ConfigError("Conv2d: channel mismatch");
    const std::int64_t Ho = out_size(x.dim(1)), Wo = out_size(x.dim(2));
    Tensor<Real> cols = im2col(x);
    Tensor<Real> y({out_ch, Ho, Wo});
    for (std::int64_t o = 0; o < out_ch; ++o)
      std::fill(y.ptr() + o * Ho * Wo, y.ptr() + (o + 1) * Ho * Wo, b[o]);
    gemm_nn(out_ch, Ho * Wo, in_ch * 9, w.ptr(), cols.ptr(), y.ptr());
    if (cols_cache) *cols_cache = std::move(cols);
    return y;
  }

  Tensor<Real> backward(const Tensor<Real>& x, const Tensor<Real>& cols, const Tensor<Real>& gy,
                        bool need_gx = true) {
    const std::int64_t H = x.dim(1), W = x.dim(2);
    const std::int64_t Ho = gy.dim(1), Wo = gy.dim(2);
    const std::int64_t P = Ho * Wo;
    gemm_nt(out_ch, in_ch * 9, P, gy.ptr(), cols.ptr(), gw.ptr());
    for (std::int64_t o = 0; o < out_ch; ++o) {
      Real s = 0;
      const Real* gyp = gy.ptr() + o * P;
      for (std::int64_t p = 0; p < P; ++p) s += gyp[p];
      gb[o] += s;
    }
    Tensor<Real> gx;
    if (need_gx) {
      Tensor<Real> gcols({in_ch * 9, P});
      gemm_tn(in_ch * 9, P, out_ch, w.ptr(), gy.ptr(), gcols.ptr());
      gx = Tensor<Real>({in_ch, H, W});
      for (std::int64_t i = 0; i < in_ch; ++i) {
        for (std::int64_t ky = 0; ky < 3; ++ky) {
          for (std::int64_t kx = 0; kx < 3; ++kx) {
            const Real* __restrict src = gcols.ptr() + ((i * 3 + ky) * 3 + kx) * P;
            for (std::int64_t oy = 0; oy < Ho; ++oy) {
              const std::int64_t sy = oy * kStride + ky - kPad;
              if (sy < 0 || sy >= H) continue;
              for (std::int64_t ox = 0; ox < Wo; ++ox) {
                const std::int64_t sx = ox * kStride + kx - kPad;
                if (sx >= 0 && sx < W) gx(i, sy, sx) += src[oy * Wo + ox];
              }
            }
          }
        }
      }
    }
    return gx;
  }

  void collect(ParamList<Real>& params, const std::string& prefix) {
    params.push_back({prefix + ".w", &w, &gw});
    params.push_back({prefix + ".b", &b, &gb});
  }
};

// ---------------------------------------------------------------------------
// Elementwise activations used without parameters.

template <typename Real>
void relu_inplace(Tensor<Real>& x) {
  for (auto& v : x.data) v = std::max(v, Real(0));
}

// gx = gy where pre-activation was positive.
template <typename Real>
Tensor<Real> relu_backward(const Tensor<Real>& pre, const Tensor<Real>& gy) {
  Tensor<Real> gx = gy;
  for (std::int64_t i = 0; i < pre.numel(); ++i)
    if (pre[i] <= Real(0)) gx[i] = Real(0);
  return gx;
}

template <typename Real>
Real sigmoid(Real v) {
  return Real(1) / (Real(1) + std::exp(-v));
}

}  // namespace audiospa::nn
