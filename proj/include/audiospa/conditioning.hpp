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

#include "audiospa/nn/layers.hpp"
#include "audiospa/nn/tensor.hpp"
#include "audiospa/text_encoder.hpp"

namespace audiospa {

using nn::ParamList;
using nn::Tensor;

enum class PoolingKind { kFmha, kFirstToken };

inline PoolingKind pooling_from_string(const std::string& s) {
  if (s == "fmha") return PoolingKind::kFmha;
  if (s == "first-token") return PoolingKind::kFirstToken;
  throw ConfigError("unknown pooling kind: " + s);
}

inline std::string pooling_to_string(PoolingKind k) {
  return k == PoolingKind::kFmha ? "fmha" : "first-token";
}

// Two fully connected layers mapping each token row independently from the
// encoder width down to the conditioning width.
template <typename Real>
struct TokenCompressor {
  nn::Linear<Real> fc1;
  nn::PReLU<Real> act;
  nn::Linear<Real> fc2;

  struct Cache {
    Tensor<Real> x, h1, h1a;
  };

  TokenCompressor() = default;
  TokenCompressor(std::int64_t encoder_dim, std::int64_t width)
      : fc1(encoder_dim, width), fc2(width, width) {}

  void init(Rng& rng) {
    fc1.init(rng);
    fc2.init(rng);
  }

  // tokens: [n, encoder_dim] -> [n, width]
  Tensor<Real> forward(const Tensor<Real>& tokens, Cache* cache = nullptr) const {
    if (tokens.dim(1) != fc1.in) throw DomainError("compress_tokens: token width mismatch");
    Tensor<Real> h1 = fc1.forward(tokens);
    Tensor<Real> h1a = act.forward(h1);
    Tensor<Real> z = fc2.forward(h1a);
    if (cache) {
      cache->x = tokens;
      cache->h1 = std::move(h1);
      cache->h1a = std::move(h1a);
    }
    return z;
  }

  void backward(const Cache& cache, const Tensor<Real>& gz) {
    Tensor<Real> gh1a = fc2.backward(cache.h1a, gz);
    Tensor<Real> gh1 = act.backward(cache.h1, gh1a);
    fc1.backward(cache.x, gh1);  // token embeddings are frozen; input grad discarded
  }

  void collect(ParamList<Real>& params, const std::string& prefix) {
    fc1.collect(params, prefix + ".fc1");
    act.collect(params, prefix + ".act");
    fc2.collect(params, prefix + ".fc2");
  }
};

// Learned-single-query attention pooling. Per head, a learned query scores
// every token's key projection; the softmax-weighted value projections are
// concatenated across heads and mapped by the output projection. The token
// axis is pooled away, so the result is one vector.
template <typename Real>
struct FMHAPool {
  std::int64_t width = 0, heads = 0, head_dim = 0;
  Tensor<Real> q, gq;    // [heads, head_dim]
  Tensor<Real> wk, gwk;  // [heads, head_dim, width]
  Tensor<Real> wv, gwv;  // [heads, head_dim, width]
  Tensor<Real> wo, gwo;  // [width, width]

  struct Cache {
    Tensor<Real> z;       // [n, width]
    Tensor<Real> k, v;    // [heads, n, head_dim]
    Tensor<Real> attn;    // [heads, n]
    Tensor<Real> pooled;  // [width] concatenated head outputs
  };

  FMHAPool() = default;
  FMHAPool(std::int64_t w, std::int64_t h) : width(w), heads(h) {
    if (h <= 0 || w % h != 0) throw ConfigError("fmha_pool: width must be divisible by head count");
    head_dim = w / h;
    q = Tensor<Real>({heads, head_dim});
    gq = Tensor<Real>({heads, head_dim});
    wk = Tensor<Real>({heads, head_dim, width});
    gwk = Tensor<Real>({heads, head_dim, width});
    wv = Tensor<Real>({heads, head_dim, width});
    gwv = Tensor<Real>({heads, head_dim, width});
    wo = Tensor<Real>({width, width});
    gwo = Tensor<Real>({width, width});
  }

  void init(Rng& rng) {
    const double bq = 1.0 / std::sqrt(static_cast<double>(head_dim));
    for (auto& v : q.data) v = static_cast<Real>(rng.uniform(-bq, bq));
    const double bw = 1.0 / std::sqrt(static_cast<double>(width));
    for (auto& v : wk.data) v = static_cast<Real>(rng.uniform(-bw, bw));
    for (auto& v : wv.data) v = static_cast<Real>(rng.uniform(-bw, bw));
    for (auto& v : wo.data) v = static_cast<Real>(rng.uniform(-bw, bw));
  }

  // tokens: [n, width] -> [width]
  Tensor<Real> forward(const Tensor<Real>& tokens, Cache* cache = nullptr) const {
    if (tokens.dim(1) != width) throw ConfigError("fmha_pool: token width mismatch");
    const std::int64_t n = tokens.dim(0);
    Tensor<Real> k({heads, n, head_dim}), v({heads, n, head_dim});
    Tensor<Real> attn({heads, n});
    Tensor<Real> pooled({width});
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
    for (std::int64_t h = 0; h < heads; ++h) {
      for (std::int64_t t = 0; t < n; ++t) {
        const Real* z = tokens.ptr() + t * width;
        for (std::int64_t d = 0; d < head_dim; ++d) {
          const Real* wkrow = wk.ptr() + (h * head_dim + d) * width;
          const Real* wvrow = wv.ptr() + (h * head_dim + d) * width;
          Real sk = 0, sv = 0;
          for (std::int64_t j = 0; j < width; ++j) {
            sk += wkrow[j] * z[j];
            sv += wvrow[j] * z[j];
          }
          k(h, t, d) = sk;
          v(h, t, d) = sv;
        }
      }
      // softmax over tokens of q . k / sqrt(head_dim)
      double max_logit = -1e300;
      std::vector<double> logits(static_cast<std::size_t>(n));
      for (std::int64_t t = 0; t < n; ++t) {
        double s = 0;
        for (std::int64_t d = 0; d < head_dim; ++d)
          s += static_cast<double>(q(h, d)) * static_cast<double>(k(h, t, d));
        logits[t] = s * scale;
        max_logit = std::max(max_logit, logits[t]);
      }
      double denom = 0;
      for (std::int64_t t = 0; t < n; ++t) {
        logits[t] = std::exp(logits[t] - max_logit);
        denom += logits[t];
      }
      for (std::int64_t t = 0; t < n; ++t) {
        attn(h, t) = static_cast<Real>(logits[t] / denom);
        for (std::int64_t d = 0; d < head_dim; ++d) pooled[h * head_dim + d] += attn(h, t) * v(h, t, d);
      }
    }
    Tensor<Real> e({width});
    for (std::int64_t i = 0; i < width; ++i) {
      const Real* worow = wo.ptr() + i * width;
      Real s = 0;
      for (std::int64_t j = 0; j < width; ++j) s += worow[j] * pooled[j];
      e[i] = s;
    }
    if (cache) {
      cache->z = tokens;
      cache->k = std::move(k);
      cache->v = std::move(v);
      cache->attn = std::move(attn);
      cache->pooled = std::move(pooled);
    }
    return e;
  }

  // Returns the gradient w.r.t. the (compressed) tokens.
  Tensor<Real> backward(const Cache& cache, const Tensor<Real>& ge) {
    const std::int64_t n = cache.z.dim(0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
    Tensor<Real> gpooled({width});
    for (std::int64_t i = 0; i < width; ++i) {
      for (std::int64_t j = 0; j < width; ++j) {
        gwo(i, j) += ge[i] * cache.pooled[j];
        gpooled[j] += wo(i, j) * ge[i];
      }
    }
    Tensor<Real> gz({n, width});
    for (std::int64_t h = 0; h < heads; ++h) {
      const Real* go = gpooled.ptr() + h * head_dim;
      // attention and value grads
      std::vector<double> gattn(static_cast<std::size_t>(n), 0.0);
      Tensor<Real> gv({n, head_dim});
      for (std::int64_t t = 0; t < n; ++t) {
        double ga = 0;
        for (std::int64_t d = 0; d < head_dim; ++d) {
          ga += static_cast<double>(go[d]) * static_cast<double>(cache.v(h, t, d));
          gv(t, d) = cache.attn(h, t) * go[d];
        }
        gattn[t] = ga;
      }
      // softmax backward
      double dot = 0;
      for (std::int64_t t = 0; t < n; ++t) dot += static_cast<double>(cache.attn(h, t)) * gattn[t];
      std::vector<double> glogit(static_cast<std::size_t>(n));
      for (std::int64_t t = 0; t < n; ++t)
        glogit[t] = static_cast<double>(cache.attn(h, t)) * (gattn[t] - dot);
      // query, key and projection grads
      for (std::int64_t t = 0; t < n; ++t) {
        const Real* z = cache.z.ptr() + t * width;
        Real* gzrow = gz.ptr() + t * width;
        for (std::int64_t d = 0; d < head_dim; ++d) {
          const Real gk = static_cast<Real>(glogit[t] * scale * static_cast<double>(q(h, d)));
          gq(h, d) += static_cast<Real>(glogit[t] * scale * static_cast<double>(cache.k(h, t, d)));
          Real* gwkrow = gwk.ptr() + (h * head_dim + d) * width;
          Real* gwvrow = gwv.ptr() + (h * head_dim + d) * width;
          const Real* wkrow = wk.ptr() + (h * head_dim + d) * width;
          const Real* wvrow = wv.ptr() + (h * head_dim + d) * width;
          const Real gvd = gv(t, d);
          for (std::int64_t j = 0; j < width; ++j) {
            gwkrow[j] += gk * z[j];
            gwvrow[j] += gvd * z[j];
            gzrow[j] += wkrow[j] * gk + wvrow[j] * gvd;
          }
        }
      }
    }
    return gz;
  }

  void collect(ParamList<Real>& params, const std::string& prefix) {
    params.push_back({prefix + ".q", &q, &gq});
    params.push_back({prefix + ".wk", &wk, &gwk});
    params.push_back({prefix + ".wv", &wv, &gwv});
    params.push_back({prefix + ".wo", &wo, &gwo});
  }
};

// Per-block modulation head: FC -> PReLU -> FC, output split into gamma and
// beta halves. The gamma bias starts at one so an untrained head begins near
// the identity modulation.
template <typename Real>
struct FiLMHead {
  std::int64_t width = 0;
  nn::Linear<Real> fc1;
  nn::PReLU<Real> act;
  nn::Linear<Real> fc2;

  struct Cache {
    Tensor<Real> e, h1, h1a;
  };

  FiLMHead() = default;
  explicit FiLMHead(std::int64_t w) : width(w), fc1(w, w), fc2(w, 2 * w) {}

  void init(Rng& rng) {
    fc1.init(rng);
    fc2.init(rng);
    for (std::int64_t i = 0; i < width; ++i) fc2.b[i] = Real(1);
    for (std::int64_t i = width; i < 2 * width; ++i) fc2.b[i] = Real(0);
  }

  // e: [width] -> (gamma, beta), each [width]
  std::pair<Tensor<Real>, Tensor<Real>> forward(const Tensor<Real>& e, Cache* cache = nullptr) const {
    if (e.numel() != width) throw ConfigError("film_params: condition width mismatch");
    Tensor<Real> row({1, width});
    std::copy(e.data.begin(), e.data.end(), row.data.begin());
    Tensor<Real> h1 = fc1.forward(row);
    Tensor<Real> h1a = act.forward(h1);
    Tensor<Real> out = fc2.forward(h1a);
    Tensor<Real> gamma({width}), beta({width});
    for (std::int64_t i = 0; i < width; ++i) {
      gamma[i] = out[i];
      beta[i] = out[width + i];
    }
    if (cache) {
      cache->e = std::move(row);
      cache->h1 = std::move(h1);
      cache->h1a = std::move(h1a);
    }
    return {std::move(gamma), std::move(beta)};
  }

  // Returns gradient w.r.t. e.
  Tensor<Real> backward(const Cache& cache, const Tensor<Real>& ggamma, const Tensor<Real>& gbeta) {
    Tensor<Real> gout({1, 2 * width});
    for (std::int64_t i = 0; i < width; ++i) {
      gout[i] = ggamma[i];
      gout[width + i] = gbeta[i];
    }
    Tensor<Real> gh1a = fc2.backward(cache.h1a, gout);
    Tensor<Real> gh1 = act.backward(cache.h1, gh1a);
    Tensor<Real> ge = fc1.backward(cache.e, gh1);
    ge.shape = {width};
    return ge;
  }

  void collect(ParamList<Real>& params, const std::string& prefix) {
    fc1.collect(params, prefix + ".fc1");
    act.collect(params, prefix + ".act");
    fc2.collect(params, prefix + ".fc2");
  }
};

// Full conditioning path: compress token embeddings, pool them into one
// vector, and derive per-block FiLM parameters from the shared vector.
template <typename Real>
struct TextConditioner {
  std::int64_t encoder_dim = 0, width = 0;
  PoolingKind pooling = PoolingKind::kFmha;
  TokenCompressor<Real> compressor;
  FMHAPool<Real> pool;
  std::vector<FiLMHead<Real>> heads;

  struct Cache {
    typename TokenCompressor<Real>::Cache comp;
    typename FMHAPool<Real>::Cache fmha;
    Tensor<Real> compressed;  // [n, width]
    std::vector<typename FiLMHead<Real>::Cache> film;
  };

  struct Output {
    Tensor<Real> condition;                         // [width]
    std::vector<Tensor<Real>> gamma, beta;          // per block, each [width]
  };

  TextConditioner() = default;
  TextConditioner(std::int64_t enc_dim, std::int64_t w, std::int64_t num_blocks, std::int64_t num_heads,
                  PoolingKind kind = PoolingKind::kFmha)
      : encoder_dim(enc_dim), width(w), pooling(kind), compressor(enc_dim, w), pool(w, num_heads) {
    heads.reserve(static_cast<std::size_t>(num_blocks));
    for (std::int64_t b = 0; b < num_blocks; ++b) heads.emplace_back(w);
  }

  void init(Rng& rng) {
    compressor.init(rng);
    pool.init(rng);
    for (auto& h : heads) h.init(rng);
  }

  Output forward(const TokenEmbeddings& emb, Cache* cache = nullptr) const {
    if (emb.dim != encoder_dim) throw DomainError("conditioner: encoder width mismatch");
    Tensor<Real> tokens({emb.tokens, emb.dim});
    for (std::size_t i = 0; i < emb.data.size(); ++i) tokens.data[i] = static_cast<Real>(emb.data[i]);
    Tensor<Real> compressed =
        compressor.forward(tokens, cache ? &cache->comp : nullptr);
    Tensor<Real> e;
    if (pooling == PoolingKind::kFmha) {
      e = pool.forward(compressed, cache ? &cache->fmha : nullptr);
    } else {
      e = Tensor<Real>({width});
      for (std::int64_t j = 0; j < width; ++j) e[j] = compressed(0, j);
    }
    Output out;
    out.gamma.resize(heads.size());
    out.beta.resize(heads.size());
    if (cache) cache->film.resize(heads.size());
    for (std::size_t b = 0; b < heads.size(); ++b) {
      auto [g, be] = heads[b].forward(e, cache ? &cache->film[b] : nullptr);
      out.gamma[b] = std::move(g);
      out.beta[b] = std::move(be);
    }
    if (cache) cache->compressed = compressed;
    out.condition = std::move(e);
    return out;
  }

  void backward(const Cache& cache, const std::vector<Tensor<Real>>& ggamma,
                const std::vector<Tensor<Real>>& gbeta) {
    Tensor<Real> ge({width});
    for (std::size_t b = 0; b < heads.size(); ++b) {
      Tensor<Real> g = heads[b].backward(cache.film[b], ggamma[b], gbeta[b]);
      for (std::int64_t i = 0; i < width; ++i) ge[i] += g[i];
    }
    Tensor<Real> gcompressed;
    if (pooling == PoolingKind::kFmha) {
      gcompressed = pool.backward(cache.fmha, ge);
    } else {
      gcompressed = Tensor<Real>({cache.compressed.dim(0), width});
      for (std::int64_t j = 0; j < width; ++j) gcompressed(0, j) = ge[j];
    }
    compressor.backward(cache.comp, gcompressed);
  }

  void collect(ParamList<Real>& params, const std::string& prefix) {
    compressor.collect(params, prefix + ".compressor");
    pool.collect(params, prefix + ".fmha");
    for (std::size_t b = 0; b < heads.size(); ++b)
      heads[b].collect(params, prefix + ".film" + std::to_string(b));
  }
};

}  // namespace audiospa
