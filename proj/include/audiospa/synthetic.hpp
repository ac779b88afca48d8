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
#include "audiospa/rng.hpp"

namespace audiospa {

struct LabeledClip {
  MonauralClip clip;
  std::vector<std::string> labels;
};

// Procedural sound events for dataset-free training and testing: tones,
// chirps and noise bursts with parameters drawn from a keyed stream.
inline LabeledClip synth_event(std::uint64_t seed, std::int64_t index, double seconds,
                               int sample_rate_hz = kDefaultSampleRateHz) {
  Rng rng = Rng::keyed({0x5EEDE7ull, seed, static_cast<std::uint64_t>(index)});
  const auto n = static_cast<std::size_t>(std::llround(seconds * sample_rate_hz));
  MonauralClip clip;
  clip.sample_rate_hz = sample_rate_hz;
  clip.samples.assign(n, 0.0);

  const int kind = static_cast<int>(index % 5);
  LabeledClip out;
  switch (kind) {
    case 0: {  // pure tone
      const double f = rng.uniform(150.0, 4000.0);
      const double phase = rng.uniform(0.0, 2.0 * kPi);
      for (std::size_t i = 0; i < n; ++i)
        clip.samples[i] = 0.5 * std::sin(2.0 * kPi * f * i / sample_rate_hz + phase);
      out.labels = {"sine tone", "tone"};
      break;
    }
    case 1: {  // harmonic tone
      const double f0 = rng.uniform(100.0, 800.0);
      for (int h = 1; h <= 4; ++h) {
        const double amp = 0.35 / h;
        const double phase = rng.uniform(0.0, 2.0 * kPi);
        for (std::size_t i = 0; i < n; ++i)
          clip.samples[i] += amp * std::sin(2.0 * kPi * f0 * h * i / sample_rate_hz + phase);
      }
      out.labels = {"harmonic tone", "tone"};
      break;
    }
    case 2: {  // linear chirp
      const double f0 = rng.uniform(100.0, 1000.0);
      const double f1 = rng.uniform(2000.0, 8000.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / sample_rate_hz;
        const double f = f0 + (f1 - f0) * t / seconds;
        clip.samples[i] = 0.5 * std::sin(2.0 * kPi * f * t);
      }
      out.labels = {"chirp", "sweep"};
      break;
    }
    case 3: {  // white noise burst with onset/offset ramps
      for (std::size_t i = 0; i < n; ++i) clip.samples[i] = 0.4 * rng.normal();
      const std::size_t ramp = std::min<std::size_t>(n / 8, static_cast<std::size_t>(sample_rate_hz / 100));
      for (std::size_t i = 0; i < ramp && i < n; ++i) {
        const double w = static_cast<double>(i + 1) / (ramp + 1);
        clip.samples[i] *= w;
        clip.samples[n - 1 - i] *= w;
      }
      out.labels = {"noise burst", "noise"};
      break;
    }
    default: {  // amplitude-modulated tone
      const double f = rng.uniform(300.0, 3000.0);
      const double mod = rng.uniform(2.0, 12.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / sample_rate_hz;
        clip.samples[i] = 0.5 * (0.6 + 0.4 * std::sin(2.0 * kPi * mod * t)) * std::sin(2.0 * kPi * f * t);
      }
      out.labels = {"pulsing tone", "tone"};
      break;
    }
  }
  out.clip = std::move(clip);
  return out;
}

// Broadband noise for pools without a noise corpus on disk.
inline MonauralClip synth_noise(std::uint64_t seed, std::int64_t index, std::size_t length,
                                int sample_rate_hz = kDefaultSampleRateHz) {
  Rng rng = Rng::keyed({0x401'5Eull, seed, static_cast<std::uint64_t>(index)});
  MonauralClip clip;
  clip.sample_rate_hz = sample_rate_hz;
  clip.samples.resize(length);
  // first-order lowpassed white noise, roughly pink
  double state = 0.0;
  const double alpha = 0.6;
  for (std::size_t i = 0; i < length; ++i) {
    state = alpha * state + (1.0 - alpha) * rng.normal();
    clip.samples[i] = 0.3 * state + 0.1 * rng.normal();
  }
  return clip;
}

}  // namespace audiospa
