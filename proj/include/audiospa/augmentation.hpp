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
#include <fstream>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "audiospa/audio.hpp"
#include "audiospa/common.hpp"
#include "audiospa/rng.hpp"
#include "audiospa/signal_model.hpp"
#include "audiospa/synthetic.hpp"

#include <json.hpp>

namespace audiospa {

// ---------------------------------------------------------------------------
// Templates

// Prompt templates; each contains {azimuth} and {event} exactly once.
struct TemplateSet {
  std::vector<std::string> templates;

  static void validate_template(const std::string& t) {
    auto count = [&](const std::string& needle) {
      std::size_t c = 0, pos = 0;
      while ((pos = t.find(needle, pos)) != std::string::npos) {
        ++c;
        pos += needle.size();
      }
      return c;
    };
    if (count("{azimuth}") != 1 || count("{event}") != 1)
      throw ConfigError("template must contain {azimuth} and {event} exactly once: " + t);
  }

  void validate() const {
    if (templates.empty()) throw ConfigError("template set is empty");
    for (const auto& t : templates) validate_template(t);
  }

  // One template per line; blank lines and '#' comments skipped.
  static TemplateSet load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open template file: " + path.string());
    TemplateSet set;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto first = line.find_first_not_of(" \t");
      if (first == std::string::npos || line[first] == '#') continue;
      set.templates.push_back(line.substr(first));
    }
    set.validate();
    return set;
  }
};

/// Exact substring substitution; the azimuth renders as a decimal integer.
inline std::string fill_template(const std::string& tmpl, int azimuth_deg, const std::string& label) {
  std::string out = tmpl;
  const auto apos = out.find("{azimuth}");
  if (apos != std::string::npos) out.replace(apos, 9, std::to_string(azimuth_deg));
  const auto epos = out.find("{event}");
  if (epos != std::string::npos) out.replace(epos, 7, label);
  return out;
}

// ---------------------------------------------------------------------------
// Event sources

class EventProvider {
 public:
  virtual ~EventProvider() = default;
  virtual std::size_t size() const = 0;
  virtual LabeledClip load(std::int64_t index) const = 0;
};

struct EventCatalog {
  struct Entry {
    std::string file;
    std::vector<std::string> labels;
  };
  std::vector<Entry> entries;
  std::filesystem::path base_dir;

  static EventCatalog load(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw DataError("cannot open event manifest: " + manifest_path.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const std::exception& e) {
      throw DataError("bad event manifest JSON: " + std::string(e.what()));
    }
    EventCatalog cat;
    cat.base_dir = manifest_path.parent_path();
    for (const auto& item : j) {
      Entry e;
      e.file = item.at("file").get<std::string>();
      for (const auto& l : item.at("labels")) e.labels.push_back(l.get<std::string>());
      if (e.labels.empty()) throw DataError("catalog entry without labels: " + e.file);
      cat.entries.push_back(std::move(e));
    }
    return cat;
  }
};

class CatalogEventSource : public EventProvider {
 public:
  explicit CatalogEventSource(EventCatalog catalog) : catalog_(std::move(catalog)) {}

  std::size_t size() const override { return catalog_.entries.size(); }

  LabeledClip load(std::int64_t index) const override {
    const auto& e = catalog_.entries.at(static_cast<std::size_t>(index));
    return LabeledClip{load_mono_wav(catalog_.base_dir / e.file), e.labels};
  }

 private:
  EventCatalog catalog_;
};

class SyntheticEventSource : public EventProvider {
 public:
  SyntheticEventSource(std::size_t count, double seconds, std::uint64_t seed,
                       int sample_rate_hz = kDefaultSampleRateHz)
      : count_(count), seconds_(seconds), seed_(seed), rate_(sample_rate_hz) {}

  std::size_t size() const override { return count_; }

  LabeledClip load(std::int64_t index) const override { return synth_event(seed_, index, seconds_, rate_); }

 private:
  std::size_t count_;
  double seconds_;
  std::uint64_t seed_;
  int rate_;
};

// ---------------------------------------------------------------------------
// Noise sources

class NoiseProvider {
 public:
  virtual ~NoiseProvider() = default;
  // Draws a segment of the requested length using the caller's stream.
  virtual MonauralClip sample(Rng& rng, std::size_t length, int sample_rate_hz) const = 0;
};

// Directory of WAV files, sampled uniformly with a random offset. Files
// shorter than the request are tiled.
class DirNoisePool : public NoiseProvider {
 public:
  explicit DirNoisePool(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw DataError("noise pool is not a directory: " + dir.string());
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".wav") files_.push_back(entry.path());
    }
    std::sort(files_.begin(), files_.end());
    if (files_.empty()) throw ConfigError("noise pool has no WAV files: " + dir.string());
  }

  MonauralClip sample(Rng& rng, std::size_t length, int sample_rate_hz) const override {
    const auto& path = files_[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(files_.size()) - 1))];
    MonauralClip file = load_mono_wav(path);
    if (file.sample_rate_hz != sample_rate_hz)
      throw DataError("noise file rate mismatch: " + path.string());
    MonauralClip out;
    out.sample_rate_hz = sample_rate_hz;
    out.samples.resize(length);
    const auto n = static_cast<std::int64_t>(file.samples.size());
    const std::int64_t offset = rng.uniform_int(0, std::max<std::int64_t>(0, n - 1));
    for (std::size_t i = 0; i < length; ++i)
      out.samples[i] = file.samples[static_cast<std::size_t>((offset + static_cast<std::int64_t>(i)) % n)];
    return out;
  }

 private:
  std::vector<std::filesystem::path> files_;
};

class SyntheticNoiseSource : public NoiseProvider {
 public:
  explicit SyntheticNoiseSource(std::uint64_t seed) : seed_(seed) {}

  MonauralClip sample(Rng& rng, std::size_t length, int sample_rate_hz) const override {
    return synth_noise(seed_, static_cast<std::int64_t>(rng.next_u64() & 0x7FFFFFFF), length, sample_rate_hz);
  }

 private:
  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Silence trimming and ingest

/// Removes leading/trailing 20 ms frames whose RMS sits more than
/// threshold_db below the loudest frame. The interior is untouched.
inline MonauralClip trim_silence(const MonauralClip& clip, double threshold_db = -40.0) {
  if (clip.samples.empty()) throw DomainError("trim_silence: empty clip");
  const std::size_t frame = std::max<std::size_t>(1, static_cast<std::size_t>(clip.sample_rate_hz / 50));
  const std::size_t num_frames = (clip.samples.size() + frame - 1) / frame;
  std::vector<double> rms(num_frames);
  double peak = 0.0;
  for (std::size_t f = 0; f < num_frames; ++f) {
    const std::size_t lo = f * frame;
    const std::size_t hi = std::min(clip.samples.size(), lo + frame);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += clip.samples[i] * clip.samples[i];
    rms[f] = std::sqrt(s / static_cast<double>(hi - lo));
    peak = std::max(peak, rms[f]);
  }
  if (peak <= 0.0) throw DomainError("trim_silence: fully silent clip");
  const double cutoff_db = 20.0 * std::log10(peak) + threshold_db;
  auto keep = [&](std::size_t f) {
    const double db = rms[f] > 0.0 ? 20.0 * std::log10(rms[f]) : -std::numeric_limits<double>::infinity();
    return db >= cutoff_db;
  };
  std::size_t first = 0;
  while (first < num_frames && !keep(first)) ++first;
  std::size_t last = num_frames;
  while (last > first && !keep(last - 1)) --last;
  if (first == last) throw DomainError("trim_silence: nothing above threshold");
  MonauralClip out;
  out.sample_rate_hz = clip.sample_rate_hz;
  out.samples.assign(clip.samples.begin() + static_cast<std::ptrdiff_t>(first * frame),
                     clip.samples.begin() + static_cast<std::ptrdiff_t>(std::min(clip.samples.size(), last * frame)));
  return out;
}

struct IngestStats {
  std::size_t kept = 0;
  std::size_t dropped = 0;
};

// Trims each file, drops clips outside [min_seconds, max_seconds], writes the
// survivors plus a manifest into out_dir.
inline IngestStats ingest_events(const std::vector<std::pair<std::filesystem::path, std::vector<std::string>>>& inputs,
                                 const std::filesystem::path& out_dir, double threshold_db = -40.0,
                                 double min_seconds = 0.5, double max_seconds = 30.0) {
  std::filesystem::create_directories(out_dir);
  nlohmann::json manifest = nlohmann::json::array();
  IngestStats stats;
  for (const auto& [path, labels] : inputs) {
    if (labels.empty()) throw DataError("ingest: entry without labels: " + path.string());
    MonauralClip clip = load_mono_wav(path);
    MonauralClip trimmed;
    try {
      trimmed = trim_silence(clip, threshold_db);
    } catch (const DomainError&) {
      ++stats.dropped;
      continue;
    }
    const double dur = trimmed.duration_s();
    if (dur < min_seconds || dur > max_seconds) {
      ++stats.dropped;
      continue;
    }
    const std::string name = path.stem().string() + ".wav";
    save_wav(out_dir / name, trimmed);
    manifest.push_back({{"file", name}, {"labels", labels}});
    ++stats.kept;
  }
  write_text_atomic(out_dir / "catalog.json", manifest.dump(2) + "\n");
  return stats;
}

// ---------------------------------------------------------------------------
// Scene sampling

struct SamplerConfig {
  double snr_low_db = 0.0;
  double snr_high_db = 15.0;
  double segment_seconds = 4.0;
  std::uint64_t seed = 0;
  bool noise_enabled = true;

  void validate() const {
    if (snr_low_db > snr_high_db) throw ConfigError("sampler: snr_low > snr_high");
    if (segment_seconds <= 0.0) throw ConfigError("sampler: segment_seconds must be positive");
  }
};

/// Draws one scene for (epoch, index). The event is catalog[index]; azimuth,
/// template, label, segment offset, SNR and noise segment all come from a
/// stream keyed by (seed, epoch, index), so the same key always yields the
/// same scene.
inline SpatialScene sample_scene(std::int64_t epoch, std::int64_t index, const EventProvider& events,
                                 const HRIRSet& hrirs, const TemplateSet& templates,
                                 const NoiseProvider* noise, const SamplerConfig& cfg) {
  cfg.validate();
  if (events.size() == 0) throw ConfigError("sample_scene: empty event source");
  if (hrirs.entries.empty()) throw ConfigError("sample_scene: empty HRIR set");
  if (templates.templates.empty()) throw ConfigError("sample_scene: empty template set");
  if (index < 0 || index >= static_cast<std::int64_t>(events.size()))
    throw DomainError("sample_scene: index out of range");

  Rng rng = Rng::keyed({cfg.seed, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(index)});
  LabeledClip event = events.load(index);

  const auto want = static_cast<std::size_t>(std::llround(cfg.segment_seconds * event.clip.sample_rate_hz));
  MonauralClip segment;
  segment.sample_rate_hz = event.clip.sample_rate_hz;
  segment.samples.assign(want, 0.0);
  if (event.clip.samples.size() > want) {
    const auto offset = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(event.clip.samples.size() - want)));
    std::copy_n(event.clip.samples.begin() + static_cast<std::ptrdiff_t>(offset), want, segment.samples.begin());
  } else {
    rng.next_u64();  // keep the draw count fixed regardless of clip length
    std::copy(event.clip.samples.begin(), event.clip.samples.end(), segment.samples.begin());
  }

  std::vector<int> azimuths;
  azimuths.reserve(hrirs.entries.size());
  for (const auto& [az, _] : hrirs.entries) azimuths.push_back(az);
  const int azimuth = azimuths[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(azimuths.size()) - 1))];

  const auto& tmpl =
      templates.templates[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(templates.templates.size()) - 1))];
  const auto& label =
      event.labels[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(event.labels.size()) - 1))];
  const double snr = rng.uniform(cfg.snr_low_db, cfg.snr_high_db);

  SpatialScene scene;
  scene.event = std::move(segment);
  scene.event_label = label;
  scene.azimuth_deg = azimuth;
  scene.prompt = fill_template(tmpl, azimuth, label);
  scene.seed = hash_combine(hash_combine(cfg.seed, static_cast<std::uint64_t>(epoch)),
                            static_cast<std::uint64_t>(index));
  if (cfg.noise_enabled && noise != nullptr) {
    scene.noise = noise->sample(rng, want, scene.event.sample_rate_hz);
    scene.snr_db = snr;
  }
  return scene;
}

// ---------------------------------------------------------------------------
// Normalization and example assembly

struct NormalizedPair {
  MonauralClip mono;
  BinauralClip binaural;
  double scale = 1.0;
};

/// Scales both clips by 1/std(mono) so the mono variance becomes one; the
/// interaural level ratio is untouched since both ears share the factor.
inline NormalizedPair normalize_pair(const MonauralClip& mono, const BinauralClip& binaural) {
  if (mono.samples.empty()) throw DomainError("normalize_pair: empty mono");
  const auto [mn, mx] = std::minmax_element(mono.samples.begin(), mono.samples.end());
  if (*mn == *mx) throw DomainError("normalize_pair: constant mono has no variance");
  const double sd = stddev(mono.samples);
  if (sd <= 0.0) throw DomainError("normalize_pair: zero-variance mono");
  const double scale = 1.0 / sd;
  NormalizedPair out{mono, binaural, scale};
  for (auto& v : out.mono.samples) v *= scale;
  for (auto& v : out.binaural.left) v *= scale;
  for (auto& v : out.binaural.right) v *= scale;
  return out;
}

struct TrainingExample {
  MonauralClip input;
  BinauralClip target;
  std::string prompt;
  int azimuth_deg = 0;
  double scale = 1.0;
};

/// Scene to final training example: clean render and delayed input, variance
/// normalization, then noise mixing, so the configured SNR is the final SNR.
inline TrainingExample assemble_example(const SpatialScene& scene, const HRIRSet& hrirs,
                                        double speed_of_sound_mps = kDefaultSpeedOfSoundMps) {
  SpatialScene clean = scene;
  clean.noise.reset();
  clean.snr_db.reset();
  TrainingPair pair = make_pair(clean, hrirs, speed_of_sound_mps);
  NormalizedPair norm = normalize_pair(pair.input, pair.target);
  TrainingExample out;
  out.prompt = scene.prompt;
  out.azimuth_deg = scene.azimuth_deg;
  out.scale = norm.scale;
  if (scene.noise.has_value()) {
    auto [m, b] = mix_noise(norm.mono, norm.binaural, *scene.noise, scene.snr_db.value());
    out.input = std::move(m);
    out.target = std::move(b);
  } else {
    out.input = std::move(norm.mono);
    out.target = std::move(norm.binaural);
  }
  return out;
}

}  // namespace audiospa
