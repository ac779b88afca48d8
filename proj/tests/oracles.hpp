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

// Brute-force reference implementations used as independent oracles. These
// stay deliberately naive and separate from the library code they check.

#pragma once

#include <cmath>
#include <vector>

#include "audiospa/audio.hpp"
#include "audiospa/rng.hpp"

namespace oracle {

// Direct O(N*M) time-domain linear convolution.
inline std::vector<double> convolve_direct(const std::vector<double>& x, const std::vector<double>& h) {
  if (x.empty() || h.empty()) return {};
  std::vector<double> out(x.size() + h.size() - 1, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < h.size(); ++j) out[i + j] += x[i] * h[j];
  return out;
}

// Elementwise mean absolute error.
inline double l1_scalar(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

// Energy-ratio SDR over a flattened pair of vectors, no caps or floors.
inline double sdr_scalar(const std::vector<double>& est, const std::vector<double>& ref) {
  double sig = 0.0, res = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    sig += ref[i] * ref[i];
    const double d = ref[i] - est[i];
    res += d * d;
  }
  return 10.0 * std::log10(sig / res);
}

// Two-line projection SI-SDR oracle.
inline double sisdr_scalar(const std::vector<double>& est, const std::vector<double>& ref) {
  double dot = 0.0, refe = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    dot += est[i] * ref[i];
    refe += ref[i] * ref[i];
  }
  const double alpha = dot / refe;
  double proj = 0.0, res = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double p = alpha * ref[i];
    proj += p * p;
    const double d = p - est[i];
    res += d * d;
  }
  return 10.0 * std::log10(proj / res);
}

inline std::vector<double> random_sequence(audiospa::Rng& rng, std::size_t n, double amp = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = amp * rng.uniform(-1.0, 1.0);
  return v;
}

inline audiospa::MonauralClip random_clip(audiospa::Rng& rng, std::size_t n, int rate = 24000) {
  return audiospa::MonauralClip{random_sequence(rng, n), rate};
}

inline audiospa::BinauralClip random_binaural(audiospa::Rng& rng, std::size_t n, int rate = 24000) {
  return audiospa::BinauralClip{random_sequence(rng, n), random_sequence(rng, n), rate};
}

}  // namespace oracle
