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
#include <string>
#include <vector>

#include "audiospa/audio.hpp"
#include "audiospa/conditioning.hpp"
#include "audiospa/nn/layers.hpp"
#include "audiospa/nn/loss.hpp"
#include "audiospa/nn/tensor.hpp"
#include "audiospa/text_encoder.hpp"

namespace audiospa {

struct BackboneConfig {
  int residual_channels = 64;   // D
  int num_blocks = 30;          // B
  int dilation_cycle = 10;      // dilations cycle through 2^0 .. 2^(cycle-1)
  int kernel_size = 3;
  int heads = 4;

  int dilation_of(int block) const { return 1 << (block % dilation_cycle); }

  // Influence radius of one output sample, per side.
  std::int64_t receptive_radius() const {
    std::int64_t r = 0;
    for (int b = 0; b < num_blocks; ++b) r += static_cast<std::int64_t>(dilation_of(b)) * (kernel_size - 1) / 2;
    return r;
  }

  void validate() const {
    if (num_blocks < 1 || residual_channels < 1) throw ConfigError("backbone: B and D must be >= 1");
    if (dilation_cycle < 1) throw ConfigError("backbone: dilation cycle must be >= 1");
    if (kernel_size < 1 || kernel_size % 2 == 0) throw ConfigError("backbone: kernel size must be odd");
    if ((2 * residual_channels) % heads != 0) throw ConfigError("backbone: 2D must be divisible by head count");
  }
};

// Gated, FiLM-modulated, dilated residual network mapping a monaural
// waveform plus a condition vector to a binaural waveform.
template <typename Real>
struct AudioSpaModel {
  BackboneConfig cfg;
  std::string encoder_key = "stub";
  nn::Conv1d<Real> in_proj;   // 1 -> D, kernel 1
  struct Block {
    nn::Conv1d<Real> dconv;   // D -> 2D, dilated
    nn::Conv1d<Real> oconv;   // D -> 2D, kernel 1; halves split into skip and residual
  };
  std::vector<Block> blocks;
  nn::Conv1d<Real> out_proj;  // D -> 2, kernel 1
  TextConditioner<Real> conditioner;

  struct BlockCache {
    Tensor<Real> e_in;     // [D, N]
    Tensor<Real> ea;       // [2D, N] pre-FiLM
    Tensor<Real> sig, th;  // [D, N] gate activations
    Tensor<Real> g;        // [D, N] gated output
  };

  struct Cache {
    Tensor<Real> x;        // [1, N]
    Tensor<Real> p;        // [D, N] pre-ReLU input projection
    std::vector<BlockCache> blocks;
    Tensor<Real> ey;       // [D, N] skip sum, pre-ReLU
    Tensor<Real> r;        // [D, N] post-ReLU
    typename TextConditioner<Real>::Cache cond;
    std::vector<Tensor<Real>> gamma, beta;
  };

  AudioSpaModel() = default;
  AudioSpaModel(const BackboneConfig& config, int encoder_dim, std::string enc_key = "stub",
                PoolingKind pooling = PoolingKind::kFmha)
      : cfg(config), encoder_key(std::move(enc_key)) {
    cfg.validate();
    const int D = cfg.residual_channels;
    in_proj = nn::Conv1d<Real>(1, D, 1);
    out_proj = nn::Conv1d<Real>(D, 2, 1);
    blocks.resize(static_cast<std::size_t>(cfg.num_blocks));
    for (int b = 0; b < cfg.num_blocks; ++b) {
      blocks[b].dconv = nn::Conv1d<Real>(D, 2 * D, cfg.kernel_size, cfg.dilation_of(b));
      blocks[b].oconv = nn::Conv1d<Real>(D, 2 * D, 1);
    }
    conditioner = TextConditioner<Real>(encoder_dim, 2 * D, cfg.num_blocks, cfg.heads, pooling);
  }

  void init(Rng& rng) {
    in_proj.init(rng);
    for (auto& b : blocks) {
      b.dconv.init(rng);
      b.oconv.init(rng);
    }
    out_proj.init(rng);
    conditioner.init(rng);
  }

  void collect(ParamList<Real>& params) {
    in_proj.collect(params, "in_proj");
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      blocks[b].dconv.collect(params, "block" + std::to_string(b) + ".dconv");
      blocks[b].oconv.collect(params, "block" + std::to_string(b) + ".oconv");
    }
    out_proj.collect(params, "out_proj");
    conditioner.collect(params, "cond");
  }

  // x: [1, N]; returns [2, N].
  Tensor<Real> forward(const Tensor<Real>& x, const TokenEmbeddings& emb, Cache* cache = nullptr) const {
    const int D = cfg.residual_channels;
    const std::int64_t N = x.dim(1);
    if (N < 1) throw DomainError("backbone: empty input");

    typename TextConditioner<Real>::Output cond = conditioner.forward(emb, cache ? &cache->cond : nullptr);

    Tensor<Real> p = in_proj.forward(x);
    Tensor<Real> e = p;
    nn::relu_inplace(e);

    Tensor<Real> ey({D, N});
    if (cache) {
      cache->x = x;
      cache->p = std::move(p);
      cache->blocks.resize(blocks.size());
      cache->gamma = cond.gamma;
      cache->beta = cond.beta;
    }

    for (std::size_t b = 0; b < blocks.size(); ++b) {
      if (cache) cache->blocks[b].e_in = e;
      Tensor<Real> ea = blocks[b].dconv.forward(e);
      if (cache) cache->blocks[b].ea = ea;  // pre-FiLM, needed for the gamma gradient
      const Tensor<Real>& gamma = cond.gamma[b];
      const Tensor<Real>& beta = cond.beta[b];
      // FiLM over channels, broadcast along time.
      for (std::int64_t c = 0; c < 2 * D; ++c) {
        Real* row = ea.ptr() + c * N;
        const Real gset = gamma[c], bset = beta[c];
        for (std::int64_t n = 0; n < N; ++n) row[n] = gset * row[n] + bset;
      }
      Tensor<Real> sig({D, N}), th({D, N}), g({D, N});
      for (std::int64_t c = 0; c < D; ++c) {
        const Real* ms = ea.ptr() + c * N;
        const Real* mt = ea.ptr() + (D + c) * N;
        Real* srow = sig.ptr() + c * N;
        Real* trow = th.ptr() + c * N;
        Real* grow = g.ptr() + c * N;
        for (std::int64_t n = 0; n < N; ++n) {
          const Real s = nn::sigmoid(ms[n]);
          const Real t = std::tanh(mt[n]);
          srow[n] = s;
          trow[n] = t;
          grow[n] = s * t;
        }
      }
      Tensor<Real> cmix = blocks[b].oconv.forward(g);
      // skip half accumulates, residual half feeds the next block
      for (std::int64_t c = 0; c < D; ++c) {
        const Real* skip = cmix.ptr() + c * N;
        const Real* res = cmix.ptr() + (D + c) * N;
        Real* eyrow = ey.ptr() + c * N;
        Real* erow = e.ptr() + c * N;
        for (std::int64_t n = 0; n < N; ++n) {
          eyrow[n] += skip[n];
          erow[n] += res[n];
        }
      }
      if (cache) {
        auto& bc = cache->blocks[b];
        bc.sig = std::move(sig);
        bc.th = std::move(th);
        bc.g = std::move(g);
      }
    }

    Tensor<Real> r = ey;
    nn::relu_inplace(r);
    Tensor<Real> yhat = out_proj.forward(r);
    if (cache) {
      cache->ey = std::move(ey);
      cache->r = std::move(r);
    }
    if (!yhat.all_finite()) throw NumericError("backbone forward produced non-finite output");
    return yhat;
  }

  // Accumulates parameter gradients for one example.
  void backward(Cache& cache, const Tensor<Real>& gyhat) {
    const int D = cfg.residual_channels;
    const std::int64_t N = cache.x.dim(1);

    Tensor<Real> gr = out_proj.backward(cache.r, gyhat);
    Tensor<Real> gey = nn::relu_backward(cache.ey, gr);

    std::vector<Tensor<Real>> ggamma(blocks.size()), gbeta(blocks.size());
    Tensor<Real> de({D, N});  // grad w.r.t. the running residual input, zero for the last block
    for (std::size_t bi = blocks.size(); bi-- > 0;) {
      BlockCache& bc = cache.blocks[bi];
      // grads of the two oconv output halves
      Tensor<Real> gc({2 * D, N});
      for (std::int64_t c = 0; c < D; ++c) {
        std::copy(gey.ptr() + c * N, gey.ptr() + (c + 1) * N, gc.ptr() + c * N);
        std::copy(de.ptr() + c * N, de.ptr() + (c + 1) * N, gc.ptr() + (D + c) * N);
      }
      Tensor<Real> gg = blocks[bi].oconv.backward(bc.g, gc);
      // gate backward into the FiLM-modulated tensor
      Tensor<Real> gm({2 * D, N});
      for (std::int64_t c = 0; c < D; ++c) {
        const Real* s = bc.sig.ptr() + c * N;
        const Real* t = bc.th.ptr() + c * N;
        const Real* ggrow = gg.ptr() + c * N;
        Real* gms = gm.ptr() + c * N;
        Real* gmt = gm.ptr() + (D + c) * N;
        for (std::int64_t n = 0; n < N; ++n) {
          gms[n] = ggrow[n] * t[n] * s[n] * (Real(1) - s[n]);
          gmt[n] = ggrow[n] * s[n] * (Real(1) - t[n] * t[n]);
        }
      }
      // FiLM backward; bc.ea holds the pre-FiLM dilated-conv output
      ggamma[bi] = Tensor<Real>({2 * D});
      gbeta[bi] = Tensor<Real>({2 * D});
      Tensor<Real> gea({2 * D, N});
      const Tensor<Real>& gamma = cache.gamma[bi];
      for (std::int64_t c = 0; c < 2 * D; ++c) {
        const Real* __restrict gmrow = gm.ptr() + c * N;
        const Real* __restrict earow = bc.ea.ptr() + c * N;
        Real* __restrict gearow = gea.ptr() + c * N;
        ggamma[bi][c] = nn::dot_strided(gmrow, earow, N);
        gbeta[bi][c] = nn::sum_strided(gmrow, N);
        const Real gset = gamma[c];
        for (std::int64_t n = 0; n < N; ++n) gearow[n] = gset * gmrow[n];
      }
      Tensor<Real> gin = blocks[bi].dconv.backward(bc.e_in, gea);
      for (std::int64_t i = 0; i < de.numel(); ++i) de[i] += gin[i];
    }
    Tensor<Real> gp = nn::relu_backward(cache.p, de);
    in_proj.backward(cache.x, gp, /*need_gx=*/false);

    conditioner.backward(cache.cond, ggamma, gbeta);
  }
};

// Convenience wrappers between clip types and tensors.

template <typename Real>
Tensor<Real> mono_to_tensor(const MonauralClip& clip) {
  Tensor<Real> x({1, static_cast<std::int64_t>(clip.samples.size())});
  for (std::size_t i = 0; i < clip.samples.size(); ++i) x[static_cast<std::int64_t>(i)] = static_cast<Real>(clip.samples[i]);
  return x;
}

template <typename Real>
Tensor<Real> binaural_to_tensor(const BinauralClip& clip) {
  const auto n = static_cast<std::int64_t>(clip.left.size());
  Tensor<Real> y({2, n});
  for (std::int64_t i = 0; i < n; ++i) {
    y[i] = static_cast<Real>(clip.left[static_cast<std::size_t>(i)]);
    y[n + i] = static_cast<Real>(clip.right[static_cast<std::size_t>(i)]);
  }
  return y;
}

template <typename Real>
BinauralClip tensor_to_binaural(const Tensor<Real>& y, int sample_rate_hz) {
  const std::int64_t n = y.dim(1);
  BinauralClip out;
  out.sample_rate_hz = sample_rate_hz;
  out.left.resize(static_cast<std::size_t>(n));
  out.right.resize(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    out.left[static_cast<std::size_t>(i)] = static_cast<double>(y[i]);
    out.right[static_cast<std::size_t>(i)] = static_cast<double>(y[n + i]);
  }
  return out;
}

/// End-to-end inference: encode the prompt, run the network, return a clip of
/// the same length and rate as the input.
template <typename Real>
BinauralClip spatialize(const AudioSpaModel<Real>& model, const TextEncoder& encoder, const MonauralClip& mono,
                        const std::string& prompt) {
  if (encoder.key() != model.encoder_key)
    throw DataError("encoder mismatch: model wants '" + model.encoder_key + "', got '" + encoder.key() + "'");
  const TokenEmbeddings emb = encoder.encode(prompt);
  const Tensor<Real> x = mono_to_tensor<Real>(mono);
  const Tensor<Real> y = model.forward(x, emb);
  return tensor_to_binaural(y, mono.sample_rate_hz);
}

}  // namespace audiospa
