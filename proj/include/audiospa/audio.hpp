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
#include <filesystem>
#include <vector>

#include "audiospa/common.hpp"
#include "audiospa/wav.hpp"

namespace audiospa {

constexpr int kDefaultSampleRateHz = 24000;

struct MonauralClip {
  std::vector<double> samples;
  int sample_rate_hz = kDefaultSampleRateHz;

  std::size_t size() const { return samples.size(); }
  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate_hz; }
};

struct BinauralClip {
  std::vector<double> left;
  std::vector<double> right;
  int sample_rate_hz = kDefaultSampleRateHz;

  std::size_t size() const { return left.size(); }
};

inline double energy(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

inline double mean(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

// Population standard deviation; variance normalization divides by this.
inline double stddev(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size()));
}

inline MonauralClip load_mono_wav(const std::filesystem::path& path) {
  WavData w = read_wav(path);
  if (w.channels.size() != 1)
    throw DataError("expected 1-channel WAV, got " + std::to_string(w.channels.size()) + ": " + path.string());
  return MonauralClip{std::move(w.channels[0]), w.sample_rate_hz};
}

inline BinauralClip load_binaural_wav(const std::filesystem::path& path) {
  WavData w = read_wav(path);
  if (w.channels.size() != 2)
    throw DataError("expected 2-channel WAV, got " + std::to_string(w.channels.size()) + ": " + path.string());
  return BinauralClip{std::move(w.channels[0]), std::move(w.channels[1]), w.sample_rate_hz};
}

inline void save_wav(const std::filesystem::path& path, const MonauralClip& clip) {
  write_wav(path, {clip.samples}, clip.sample_rate_hz);
}

inline void save_wav(const std::filesystem::path& path, const BinauralClip& clip) {
  if (clip.left.size() != clip.right.size()) throw DomainError("binaural channel length mismatch");
  write_wav(path, {clip.left, clip.right}, clip.sample_rate_hz);
}

}  // namespace audiospa
