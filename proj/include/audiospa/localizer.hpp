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
#include <array>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "audiospa/audio.hpp"
#include "audiospa/fft.hpp"
#include "audiospa/nn/layers.hpp"
#include "audiospa/nn/loss.hpp"
#include "audiospa/nn/tensor.hpp"

namespace audiospa {

using nn::ParamList;
using nn::Tensor;

struct StftConfig {
  int fft_size = 512;
  int hop = 256;

  int freq_bins() const { return fft_size / 2 + 1; }
  int frame_count(std::int64_t samples) const {
    return static_cast<int>((samples - fft_size) / hop) + 1;
  }
};

// Raw per-ear phase and log-compressed magnitude spectrograms, [2, F, T].
struct BinauralFeatures {
  Tensor<double> phase;
  Tensor<double> magnitude;
};

/// Per-ear STFT with a periodic Hann window. Phase is atan2 in (-pi, pi];
/// magnitude is log1p-compressed.
inline BinauralFeatures stft_features(const BinauralClip& audio, const StftConfig& cfg = {}) {
  const std::int64_t n = static_cast<std::int64_t>(audio.left.size());
  if (n < cfg.fft_size) throw DomainError("stft_features: input shorter than one FFT frame");
  if (audio.right.size() != audio.left.size()) throw DomainError("stft_features: channel length mismatch");
  const int F = cfg.freq_bins();
  const int T = cfg.frame_count(n);

  std::vector<double> window(static_cast<std::size_t>(cfg.fft_size));
  for (int i = 0; i < cfg.fft_size; ++i)
    window[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * i / cfg.fft_size));

  BinauralFeatures out;
  out.phase = Tensor<double>({2, F, T});
  out.magnitude = Tensor<double>({2, F, T});
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(cfg.fft_size));
  for (int ear = 0; ear < 2; ++ear) {
    const std::vector<double>& x = ear == 0 ? audio.left : audio.right;
    for (int t = 0; t < T; ++t) {
      const std::int64_t start = static_cast<std::int64_t>(t) * cfg.hop;
      for (int i = 0; i < cfg.fft_size; ++i) buf[i] = x[start + i] * window[i];
      fft_inplace(buf, false);
      for (int f = 0; f < F; ++f) {
        out.phase(ear, f, t) = std::atan2(buf[f].imag(), buf[f].real());
        out.magnitude(ear, f, t) = std::log1p(std::abs(buf[f]));
      }
    }
  }
  return out;
}

struct LocalizerConfig {
  StftConfig stft;
  double analysis_seconds = 4.0;
  int sample_rate_hz = kDefaultSampleRateHz;
  int num_classes = 36;

  std::int64_t analysis_samples() const {
    return static_cast<std::int64_t>(std::llround(analysis_seconds * sample_rate_hz));
  }
};

/// Center-crops longer clips to the analysis window and zero-pads shorter
/// ones at the tail.
inline BinauralClip fit_analysis_window(const BinauralClip& clip, const LocalizerConfig& cfg) {
  const std::int64_t want = cfg.analysis_samples();
  const auto n = static_cast<std::int64_t>(clip.left.size());
  BinauralClip out;
  out.sample_rate_hz = clip.sample_rate_hz;
  out.left.assign(static_cast<std::size_t>(want), 0.0);
  out.right.assign(static_cast<std::size_t>(want), 0.0);
  const std::int64_t offset = n > want ? (n - want) / 2 : 0;
  const std::int64_t count = std::min(n, want);
  for (std::int64_t i = 0; i < count; ++i) {
    out.left[static_cast<std::size_t>(i)] = clip.left[static_cast<std::size_t>(offset + i)];
    out.right[static_cast<std::size_t>(i)] = clip.right[static_cast<std::size_t>(offset + i)];
  }
  return out;
}

using DOAPosterior = std::vector<double>;

// Two-branch CNN over phase and magnitude spectrograms, fused and flattened
// into a 36-way multi-label classifier.
template <typename Real>
struct LocalizationModel {
  LocalizerConfig cfg;
  int feat_f = 0, feat_t = 0;
  std::int64_t flat_dim = 0;

  std::array<nn::Conv2d<Real>, 3> phase_convs, mag_convs, fusion_convs;
  std::array<nn::PReLU<Real>, 3> phase_acts, mag_acts, fusion_acts;
  nn::Linear<Real> fc1, fc2, fc3;
  nn::PReLU<Real> fc1_act, fc2_act;

  struct BranchCache {
    std::array<Tensor<Real>, 3> cols, pre, post;
    Tensor<Real> input;
  };

  struct Cache {
    BranchCache phase, mag;
    Tensor<Real> concat;
    std::array<Tensor<Real>, 3> fu_cols, fu_pre, fu_post;
    Tensor<Real> flat, fc1_pre, fc1_post, fc2_pre, fc2_post, logits;
  };

  LocalizationModel() = default;
  explicit LocalizationModel(const LocalizerConfig& config) : cfg(config) {
    feat_f = cfg.stft.freq_bins();
    feat_t = cfg.stft.frame_count(cfg.analysis_samples());
    const std::array<std::int64_t, 4> branch_ch = {2, 16, 32, 64};
    for (int i = 0; i < 3; ++i) {
      phase_convs[i] = nn::Conv2d<Real>(branch_ch[i], branch_ch[i + 1]);
      mag_convs[i] = nn::Conv2d<Real>(branch_ch[i], branch_ch[i + 1]);
    }
    const std::array<std::int64_t, 4> fusion_ch = {128, 64, 32, 16};
    for (int i = 0; i < 3; ++i) fusion_convs[i] = nn::Conv2d<Real>(fusion_ch[i], fusion_ch[i + 1]);
    std::int64_t f = feat_f, t = feat_t;
    for (int i = 0; i < 6; ++i) {
      f = nn::Conv2d<Real>::out_size(f);
      t = nn::Conv2d<Real>::out_size(t);
    }
    flat_dim = 16 * f * t;
    fc1 = nn::Linear<Real>(flat_dim, 512);
    fc2 = nn::Linear<Real>(512, 256);
    fc3 = nn::Linear<Real>(256, cfg.num_classes);
  }

  void init(Rng& rng) {
    for (int i = 0; i < 3; ++i) {
      phase_convs[i].init(rng);
      mag_convs[i].init(rng);
      fusion_convs[i].init(rng);
    }
    fc1.init(rng);
    fc2.init(rng);
    fc3.init(rng);
  }

  void collect(ParamList<Real>& params) {
    for (int i = 0; i < 3; ++i) {
      phase_convs[i].collect(params, "phase" + std::to_string(i));
      phase_acts[i].collect(params, "phase" + std::to_string(i) + ".act");
      mag_convs[i].collect(params, "mag" + std::to_string(i));
      mag_acts[i].collect(params, "mag" + std::to_string(i) + ".act");
    }
    for (int i = 0; i < 3; ++i) {
      fusion_convs[i].collect(params, "fusion" + std::to_string(i));
      fusion_acts[i].collect(params, "fusion" + std::to_string(i) + ".act");
    }
    fc1.collect(params, "fc1");
    fc1_act.collect(params, "fc1.act");
    fc2.collect(params, "fc2");
    fc2_act.collect(params, "fc2.act");
    fc3.collect(params, "fc3");
  }

 private:
  Tensor<Real> branch_forward(const Tensor<double>& feat, const std::array<nn::Conv2d<Real>, 3>& convs,
                              const std::array<nn::PReLU<Real>, 3>& acts, BranchCache* cache) const {
    Tensor<Real> x({feat.dim(0), feat.dim(1), feat.dim(2)});
    for (std::int64_t i = 0; i < feat.numel(); ++i) x[i] = static_cast<Real>(feat[i]);
    if (cache) cache->input = x;
    for (int i = 0; i < 3; ++i) {
      Tensor<Real> pre = convs[i].forward(x, cache ? &cache->cols[i] : nullptr);
      Tensor<Real> post = acts[i].forward(pre);
      if (cache) {
        cache->pre[i] = std::move(pre);
        cache->post[i] = post;
      }
      x = std::move(post);
    }
    return x;
  }

  void branch_backward(BranchCache& cache, std::array<nn::Conv2d<Real>, 3>& convs,
                       std::array<nn::PReLU<Real>, 3>& acts, const Tensor<Real>& gout) {
    Tensor<Real> g = gout;
    for (int i = 2; i >= 0; --i) {
      g = acts[i].backward(cache.pre[i], g);
      const Tensor<Real>& input = i == 0 ? cache.input : cache.post[i - 1];
      g = convs[i].backward(input, cache.cols[i], g, /*need_gx=*/i > 0);
    }
  }

 public:
  // Returns the 36 sigmoid probabilities.
  Tensor<Real> forward(const BinauralFeatures& features, Cache* cache = nullptr) const {
    if (features.phase.dim(1) != feat_f || features.phase.dim(2) != feat_t)
      throw ConfigError("localizer: feature shape mismatch (expected " + std::to_string(feat_f) + "x" +
                        std::to_string(feat_t) + ")");
    Tensor<Real> ph = branch_forward(features.phase, phase_convs, phase_acts, cache ? &cache->phase : nullptr);
    Tensor<Real> mg = branch_forward(features.magnitude, mag_convs, mag_acts, cache ? &cache->mag : nullptr);

    Tensor<Real> x({ph.dim(0) * 2, ph.dim(1), ph.dim(2)});
    std::copy(ph.data.begin(), ph.data.end(), x.data.begin());
    std::copy(mg.data.begin(), mg.data.end(), x.data.begin() + ph.numel());
    if (cache) cache->concat = x;

    for (int i = 0; i < 3; ++i) {
      Tensor<Real> pre = fusion_convs[i].forward(x, cache ? &cache->fu_cols[i] : nullptr);
      Tensor<Real> post = fusion_acts[i].forward(pre);
      if (cache) {
        cache->fu_pre[i] = std::move(pre);
        cache->fu_post[i] = post;
      }
      x = std::move(post);
    }

    Tensor<Real> flat({1, flat_dim});
    std::copy(x.data.begin(), x.data.end(), flat.data.begin());
    Tensor<Real> h1 = fc1.forward(flat);
    Tensor<Real> h1a = fc1_act.forward(h1);
    Tensor<Real> h2 = fc2.forward(h1a);
    Tensor<Real> h2a = fc2_act.forward(h2);
    Tensor<Real> logits = fc3.forward(h2a);

    Tensor<Real> prob({static_cast<std::int64_t>(cfg.num_classes)});
    for (std::int64_t i = 0; i < prob.numel(); ++i) prob[i] = nn::sigmoid(logits[i]);
    if (cache) {
      cache->flat = std::move(flat);
      cache->fc1_pre = std::move(h1);
      cache->fc1_post = std::move(h1a);
      cache->fc2_pre = std::move(h2);
      cache->fc2_post = std::move(h2a);
      cache->logits = std::move(logits);
    }
    if (!prob.all_finite()) throw NumericError("localizer forward produced non-finite output");
    return prob;
  }

  // BCE-with-logits gradient; prob and multi-hot target both length 36.
  void backward(Cache& cache, const Tensor<Real>& prob, const Tensor<Real>& target) {
    Tensor<Real> gz({1, static_cast<std::int64_t>(cfg.num_classes)});
    for (std::int64_t i = 0; i < gz.numel(); ++i) gz[i] = prob[i] - target[i];
    Tensor<Real> g = fc3.backward(cache.fc2_post, gz);
    g = fc2_act.backward(cache.fc2_pre, g);
    g = fc2.backward(cache.fc1_post, g);
    g = fc1_act.backward(cache.fc1_pre, g);
    g = fc1.backward(cache.flat, g);

    Tensor<Real> gx(cache.fu_post[2].shape);
    std::copy(g.data.begin(), g.data.end(), gx.data.begin());
    for (int i = 2; i >= 0; --i) {
      gx = fusion_acts[i].backward(cache.fu_pre[i], gx);
      const Tensor<Real>& input = i == 0 ? cache.concat : cache.fu_post[i - 1];
      gx = fusion_convs[i].backward(input, cache.fu_cols[i], gx);
    }

    const std::int64_t half = gx.numel() / 2;
    Tensor<Real> gph(cache.phase.post[2].shape), gmg(cache.mag.post[2].shape);
    std::copy(gx.data.begin(), gx.data.begin() + half, gph.data.begin());
    std::copy(gx.data.begin() + half, gx.data.end(), gmg.data.begin());
    branch_backward(cache.phase, phase_convs, phase_acts, gph);
    branch_backward(cache.mag, mag_convs, mag_acts, gmg);
  }
};

/// Top-k azimuth decoding: argmax for one source; for more, greedy peak
/// picking on the cyclic class circle with immediate-neighbor suppression.
/// Ties break toward the smaller class index.
inline std::vector<int> decode_doa(const DOAPosterior& posterior, int num_sources = 1) {
  const int n = static_cast<int>(posterior.size());
  if (n == 0) throw DomainError("decode_doa: empty posterior");
  if (num_sources < 1 || num_sources > n) throw DomainError("decode_doa: bad source count");
  std::vector<int> order(posterior.size());
  for (int i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (posterior[a] != posterior[b]) return posterior[a] > posterior[b];
    return a < b;
  });
  std::vector<bool> suppressed(posterior.size(), false);
  std::vector<int> picked;
  for (int idx : order) {
    if (static_cast<int>(picked.size()) == num_sources) break;
    if (suppressed[idx]) continue;
    picked.push_back(idx);
    suppressed[(idx + 1) % n] = true;
    suppressed[(idx + n - 1) % n] = true;
  }
  std::vector<int> azimuths;
  azimuths.reserve(picked.size());
  for (int cls : picked) azimuths.push_back(cls * 10);
  return azimuths;
}

// Multi-hot target for a set of active classes.
template <typename Real>
Tensor<Real> doa_target(const std::vector<int>& azimuth_degs, int num_classes = 36) {
  Tensor<Real> t({static_cast<std::int64_t>(num_classes)});
  for (int az : azimuth_degs) {
    if (az % 10 != 0 || az < 0 || az >= 360) throw DomainError("doa_target: bad azimuth " + std::to_string(az));
    t[az / 10] = Real(1);
  }
  return t;
}

/// Full clip-to-azimuth path: window fitting, feature extraction, forward
/// pass and decoding.
template <typename Real>
std::pair<std::vector<int>, DOAPosterior> localize(const LocalizationModel<Real>& model, const BinauralClip& clip,
                                                   int num_sources = 1) {
  const BinauralClip fitted = fit_analysis_window(clip, model.cfg);
  const BinauralFeatures feats = stft_features(fitted, model.cfg.stft);
  const Tensor<Real> prob = model.forward(feats);
  DOAPosterior posterior(prob.data.begin(), prob.data.end());
  return {decode_doa(posterior, num_sources), posterior};
}

}  // namespace audiospa
