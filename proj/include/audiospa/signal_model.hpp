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
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "audiospa/audio.hpp"
#include "audiospa/common.hpp"
#include "audiospa/fft.hpp"
#include "audiospa/wav.hpp"

#include <json.hpp>

namespace audiospa {

constexpr double kDefaultSpeedOfSoundMps = 343.0;
constexpr double kDefaultHrirDistanceM = 1.47;
constexpr int kAzimuthStepDeg = 10;
constexpr int kNumAzimuthClasses = 36;

struct HRIRPair {
  std::vector<double> left;
  std::vector<double> right;
  int sample_rate_hz = kDefaultSampleRateHz;
};

// Azimuth-indexed impulse-response set on the horizontal plane. Azimuths are
// integer multiples of 10 degrees; 90 is the listener's left.
struct HRIRSet {
  std::map<int, HRIRPair> entries;
  double distance_m = kDefaultHrirDistanceM;
  int sample_rate_hz = kDefaultSampleRateHz;

  bool is_full() const { return entries.size() == kNumAzimuthClasses; }

  std::size_t ir_length() const { return entries.empty() ? 0 : entries.begin()->second.left.size(); }

  const HRIRPair& at(int azimuth_deg) const {
    auto it = entries.find(azimuth_deg);
    if (it == entries.end())
      throw DomainError("azimuth " + std::to_string(azimuth_deg) + " not present in HRIR set");
    return it->second;
  }

  void validate() const {
    const std::size_t n = ir_length();
    for (const auto& [az, pair] : entries) {
      if (az < 0 || az >= 360 || az % 10 != 0)
        throw DomainError("HRIR azimuth must be a multiple of 10 in [0,350], got " + std::to_string(az));
      if (pair.left.size() != n || pair.right.size() != n)
        throw DomainError("HRIR lengths differ across entries");
      if (pair.sample_rate_hz != sample_rate_hz) throw DomainError("HRIR sample rate differs across entries");
    }
  }
};

// One training/eval example description. `noise` and `snr_db` are either
// both present or both absent; a clean scene simply has no noise.
struct SpatialScene {
  MonauralClip event;
  std::string event_label;
  int azimuth_deg = 0;
  std::string prompt;
  std::optional<MonauralClip> noise;
  std::optional<double> snr_db;
  double scale = 1.0;
  std::uint64_t seed = 0;
};

struct TrainingPair {
  MonauralClip input;
  BinauralClip target;
  std::string prompt;
};

/// Propagation delay in whole samples, rounded half away from zero.
inline int compute_delay(double distance_m, double speed_of_sound_mps, int sample_rate_hz) {
  if (!(distance_m > 0.0) || !std::isfinite(distance_m)) throw DomainError("compute_delay: distance must be positive");
  if (!(speed_of_sound_mps > 0.0) || !std::isfinite(speed_of_sound_mps))
    throw DomainError("compute_delay: speed of sound must be positive");
  if (sample_rate_hz <= 0) throw DomainError("compute_delay: sample rate must be positive");
  const double tau = distance_m / speed_of_sound_mps * static_cast<double>(sample_rate_hz);
  return static_cast<int>(std::round(tau));
}

/// Shifts the clip right by tau samples, zero-filling the front. Length is
/// preserved; the tail falls off.
inline MonauralClip delay_input(const MonauralClip& raw, int tau) {
  const auto n = static_cast<int>(raw.samples.size());
  if (tau < 0) throw DomainError("delay_input: negative delay");
  if (tau > n) throw DomainError("delay_input: delay exceeds clip length");
  MonauralClip out;
  out.sample_rate_hz = raw.sample_rate_hz;
  out.samples.assign(raw.samples.size(), 0.0);
  for (int i = tau; i < n; ++i) out.samples[i] = raw.samples[i - tau];
  return out;
}

/// Convolves the clip with the per-ear impulse responses and keeps the first
/// N samples, so output length equals input length.
inline BinauralClip render_binaural(const MonauralClip& raw, const HRIRPair& hrir) {
  if (raw.sample_rate_hz != hrir.sample_rate_hz)
    throw DomainError("render_binaural: sample rate mismatch (" + std::to_string(raw.sample_rate_hz) + " vs " +
                      std::to_string(hrir.sample_rate_hz) + ")");
  if (raw.samples.empty() || hrir.left.empty() || hrir.right.empty())
    throw DomainError("render_binaural: empty input");
  const std::size_t n = raw.samples.size();
  std::vector<double> l = fft_convolve(raw.samples, hrir.left);
  std::vector<double> r = fft_convolve(raw.samples, hrir.right);
  l.resize(n);
  r.resize(n);
  return BinauralClip{std::move(l), std::move(r), raw.sample_rate_hz};
}

// Scale factor g applied to the noise so that the binaural SNR comes out at
// snr_db, referenced to the mean energy of the two channels.
inline double noise_gain(const BinauralClip& binaural, const MonauralClip& noise, double snr_db) {
  const double sig = 0.5 * (energy(binaural.left) + energy(binaural.right));
  const double noi = energy(noise.samples);
  if (noi <= 0.0) throw DomainError("mix_noise: silent noise, SNR undefined");
  if (sig <= 0.0) throw DomainError("mix_noise: silent binaural, SNR undefined");
  if (!std::isfinite(snr_db)) throw DomainError("mix_noise: non-finite SNR");
  return std::sqrt(sig / (noi * db_to_power_ratio(snr_db)));
}

/// Adds the same scaled noise sequence to the mono clip and to both binaural
/// channels. One gain g for all three, chosen from the binaural mean energy.
inline std::pair<MonauralClip, BinauralClip> mix_noise(const MonauralClip& mono, const BinauralClip& binaural,
                                                       const MonauralClip& noise, double snr_db) {
  const std::size_t n = mono.samples.size();
  if (binaural.left.size() != n || binaural.right.size() != n || noise.samples.size() != n)
    throw DomainError("mix_noise: clip lengths differ");
  if (mono.sample_rate_hz != binaural.sample_rate_hz || noise.sample_rate_hz != mono.sample_rate_hz)
    throw DomainError("mix_noise: sample rate mismatch");
  const double g = noise_gain(binaural, noise, snr_db);
  MonauralClip mono_out = mono;
  BinauralClip bin_out = binaural;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = g * noise.samples[i];
    mono_out.samples[i] += v;
    bin_out.left[i] += v;
    bin_out.right[i] += v;
  }
  return {std::move(mono_out), std::move(bin_out)};
}

/// Builds the (input, target, prompt) triple for a scene: target is the HRIR
/// render of the event, input is the event delayed by the set's propagation
/// delay, and the identical noise (if any) goes into all channels.
inline TrainingPair make_pair(const SpatialScene& scene, const HRIRSet& hrirs,
                              double speed_of_sound_mps = kDefaultSpeedOfSoundMps) {
  const HRIRPair& hrir = hrirs.at(scene.azimuth_deg);
  BinauralClip target = render_binaural(scene.event, hrir);
  const int tau = compute_delay(hrirs.distance_m, speed_of_sound_mps, scene.event.sample_rate_hz);
  MonauralClip input = delay_input(scene.event, tau);
  if (scene.noise.has_value()) {
    if (!scene.snr_db.has_value()) throw DomainError("make_pair: noise without SNR");
    auto [m, b] = mix_noise(input, target, *scene.noise, *scene.snr_db);
    input = std::move(m);
    target = std::move(b);
  }
  return TrainingPair{std::move(input), std::move(target), scene.prompt};
}

namespace detail {

// Woodworth creeping-wave delay of an ear at angle phi (radians) from the
// source direction, relative to the head center.
inline double ear_delay_s(double phi, double head_radius_m, double c) {
  const double a = std::abs(phi);
  if (a < kPi / 2.0) return -(head_radius_m / c) * std::cos(a);
  return (head_radius_m / c) * (a - kPi / 2.0);
}

// Windowed-sinc impulse at fractional position, accumulated into ir.
inline void place_sinc(std::vector<double>& ir, double center, double gain) {
  constexpr int kHalfWidth = 32;
  const int lo = std::max(0, static_cast<int>(std::floor(center)) - kHalfWidth);
  const int hi = std::min(static_cast<int>(ir.size()) - 1, static_cast<int>(std::ceil(center)) + kHalfWidth);
  for (int i = lo; i <= hi; ++i) {
    const double t = static_cast<double>(i) - center;
    const double sinc = (std::abs(t) < 1e-12) ? 1.0 : std::sin(kPi * t) / (kPi * t);
    const double w = 0.5 * (1.0 + std::cos(kPi * t / (kHalfWidth + 1)));  // Hann taper
    ir[i] += gain * sinc * w;
  }
}

// Pinna-style rear attenuation of high frequencies: a one-pole lowpass mixed
// in proportionally to how far behind the listener the source sits. Applied
// identically to both ears, so ITD/ILD and the left/right mirror symmetry
// are untouched, while front and back directions become spectrally distinct.
inline void apply_rear_lowpass(std::vector<double>& ir, double backness) {
  if (backness <= 0.0) return;
  const double a = 0.85 * backness;
  double state = 0.0;
  for (double& v : ir) {
    state = (1.0 - a) * v + a * state;
    v = state;
  }
}

}  // namespace detail

/// Spherical-head impulse-response pair: bulk propagation delay plus Woodworth
/// per-ear delay, with the shadowed ear attenuated in proportion to
/// |sin(azimuth)|. Azimuth 90 is the left side, so mirrored azimuths swap
/// ears exactly.
inline HRIRPair synth_hrir(int azimuth_deg, double head_radius_m, double distance_m, int sample_rate_hz,
                           int length) {
  if (!(head_radius_m > 0.0)) throw DomainError("synth_hrir: head radius must be positive");
  if (!(distance_m > 0.0)) throw DomainError("synth_hrir: distance must be positive");
  if (azimuth_deg < 0 || azimuth_deg >= 360) throw DomainError("synth_hrir: azimuth out of [0,360)");
  if (length <= 0 || sample_rate_hz <= 0) throw DomainError("synth_hrir: bad length or rate");

  // Work on the left-hemisphere mirror so theta and 360-theta produce
  // bit-identical swapped pairs.
  const int mirrored = std::min(azimuth_deg, 360 - azimuth_deg);
  const bool swap_ears = azimuth_deg > 180;

  const double c = kDefaultSpeedOfSoundMps;
  // Ear angles from the source direction, in integer degrees first so the
  // mirror symmetry is exact. Left ear sits at +90 degrees.
  const int phi_near_deg = std::abs(mirrored - 90);
  const int phi_far_deg = (mirrored + 90 > 180) ? 360 - (mirrored + 90) : mirrored + 90;
  const double theta = static_cast<double>(mirrored) * kPi / 180.0;
  const double phi_near = static_cast<double>(phi_near_deg) * kPi / 180.0;
  const double phi_far = static_cast<double>(phi_far_deg) * kPi / 180.0;
  const double base_delay = distance_m / c * sample_rate_hz;  // fractional samples

  const double near_pos = base_delay + detail::ear_delay_s(phi_near, head_radius_m, c) * sample_rate_hz;
  const double far_pos = base_delay + detail::ear_delay_s(phi_far, head_radius_m, c) * sample_rate_hz;

  constexpr double kMaxShadowDb = 12.0;
  const double shadow = std::abs(std::sin(theta));
  const double near_gain = 1.0;
  const double far_gain = std::pow(10.0, -kMaxShadowDb * shadow / 20.0);

  std::vector<double> near_ir(length, 0.0), far_ir(length, 0.0);
  detail::place_sinc(near_ir, near_pos, near_gain);
  detail::place_sinc(far_ir, far_pos, far_gain);
  const double backness = 0.5 * (1.0 - std::cos(theta));  // 0 ahead, 1 behind
  detail::apply_rear_lowpass(near_ir, backness);
  detail::apply_rear_lowpass(near_ir, backness);
  detail::apply_rear_lowpass(far_ir, backness);
  detail::apply_rear_lowpass(far_ir, backness);

  HRIRPair out;
  out.sample_rate_hz = sample_rate_hz;
  if (swap_ears) {
    out.left = std::move(far_ir);
    out.right = std::move(near_ir);
  } else {
    out.left = std::move(near_ir);
    out.right = std::move(far_ir);
  }
  return out;
}

inline HRIRSet synth_hrir_set(int num_azimuths = kNumAzimuthClasses, double head_radius_m = 0.0875,
                              double distance_m = kDefaultHrirDistanceM, int sample_rate_hz = kDefaultSampleRateHz,
                              int length = 256) {
  if (num_azimuths <= 0 || num_azimuths > kNumAzimuthClasses || kNumAzimuthClasses % num_azimuths != 0)
    throw DomainError("synth_hrir_set: azimuth count must divide 36");
  HRIRSet set;
  set.distance_m = distance_m;
  set.sample_rate_hz = sample_rate_hz;
  const int step = 360 / num_azimuths;
  for (int az = 0; az < 360; az += step)
    set.entries.emplace(az, synth_hrir(az, head_radius_m, distance_m, sample_rate_hz, length));
  set.validate();
  return set;
}

// ---------------------------------------------------------------------------
// Manifest I/O. Layout: manifest JSON next to one stereo WAV per azimuth,
// left ear in channel 0.

inline void save_hrir_set(const std::filesystem::path& dir, const HRIRSet& set) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["sample_rate_hz"] = set.sample_rate_hz;
  manifest["distance_m"] = set.distance_m;
  manifest["entries"] = nlohmann::json::array();
  for (const auto& [az, pair] : set.entries) {
    const std::string name = "hrir_" + std::to_string(az) + ".wav";
    write_wav(dir / name, {pair.left, pair.right}, set.sample_rate_hz);
    manifest["entries"].push_back({{"azimuth_deg", az}, {"file", name}});
  }
  write_text_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline HRIRSet load_hrir_set(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open HRIR manifest: " + manifest_path.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const std::exception& e) {
    throw DataError("bad HRIR manifest JSON: " + std::string(e.what()));
  }
  HRIRSet set;
  set.sample_rate_hz = manifest.at("sample_rate_hz").get<int>();
  set.distance_m = manifest.at("distance_m").get<double>();
  const auto base = manifest_path.parent_path();
  for (const auto& entry : manifest.at("entries")) {
    const int az = entry.at("azimuth_deg").get<int>();
    WavData w = read_wav(base / entry.at("file").get<std::string>());
    if (w.channels.size() != 2) throw DataError("HRIR file must be 2-channel");
    HRIRPair pair{std::move(w.channels[0]), std::move(w.channels[1]), w.sample_rate_hz};
    if (!set.entries.emplace(az, std::move(pair)).second)
      throw DataError("duplicate azimuth in HRIR manifest: " + std::to_string(az));
  }
  set.validate();
  return set;
}

}  // namespace audiospa
