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

#include <catch2/catch.hpp>

#include <filesystem>

#include "audiospa/signal_model.hpp"
#include "oracles.hpp"

using namespace audiospa;

TEST_CASE("compute_delay matches hand-computed values", "[signal_model]") {
  CHECK(compute_delay(343.0, 343.0, 24000) == 24000);
  CHECK(compute_delay(1.47, 343.0, 24000) == 103);  // 102.857...
  CHECK(compute_delay(0.001, 343.0, 24000) == 0);
  CHECK(compute_delay(1.0, 2.0, 5) == 3);  // exact tie rounds away from zero
  CHECK_THROWS_AS(compute_delay(0.0, 343.0, 24000), DomainError);
  CHECK_THROWS_AS(compute_delay(1.0, -1.0, 24000), DomainError);
  CHECK_THROWS_AS(compute_delay(1.0, 343.0, 0), DomainError);
}

TEST_CASE("delay_input shifts and zero-fills", "[signal_model]") {
  MonauralClip clip{{1, 2, 3, 4}, 24000};
  CHECK(delay_input(clip, 2).samples == std::vector<double>{0, 0, 1, 2});
  CHECK(delay_input(clip, 0).samples == clip.samples);
  MonauralClip three{{5, 6, 7}, 24000};
  CHECK(delay_input(three, 3).samples == std::vector<double>{0, 0, 0});
  CHECK_THROWS_AS(delay_input(three, 4), DomainError);
  CHECK_THROWS_AS(delay_input(three, -1), DomainError);
}

TEST_CASE("render_binaural against the direct-convolution oracle", "[signal_model]") {
  Rng rng(101);

  SECTION("unit impulse is the identity") {
    MonauralClip raw = oracle::random_clip(rng, 64);
    HRIRPair impulse;
    impulse.left = {1.0};
    impulse.right = {1.0};
    BinauralClip out = render_binaural(raw, impulse);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      CHECK(out.left[i] == Approx(raw.samples[i]).margin(1e-9));
      CHECK(out.right[i] == Approx(raw.samples[i]).margin(1e-9));
    }
  }

  SECTION("random case vs direct convolution, truncated to N") {
    MonauralClip raw = oracle::random_clip(rng, 8);
    HRIRPair hrir{oracle::random_sequence(rng, 4), oracle::random_sequence(rng, 4), 24000};
    BinauralClip out = render_binaural(raw, hrir);
    auto dl = oracle::convolve_direct(raw.samples, hrir.left);
    auto dr = oracle::convolve_direct(raw.samples, hrir.right);
    REQUIRE(out.size() == 8);
    for (std::size_t i = 0; i < 8; ++i) {
      CHECK(out.left[i] == Approx(dl[i]).margin(1e-9));
      CHECK(out.right[i] == Approx(dr[i]).margin(1e-9));
    }
  }

  SECTION("zero right channel stays zero") {
    MonauralClip raw = oracle::random_clip(rng, 32);
    HRIRPair hrir{oracle::random_sequence(rng, 8), std::vector<double>(8, 0.0), 24000};
    BinauralClip out = render_binaural(raw, hrir);
    for (double v : out.right) CHECK(v == 0.0);
  }

  SECTION("sample rate mismatch is rejected") {
    MonauralClip raw = oracle::random_clip(rng, 16, 48000);
    HRIRPair hrir{{1.0}, {1.0}, 24000};
    CHECK_THROWS_AS(render_binaural(raw, hrir), DomainError);
  }
}

TEST_CASE("fast and direct convolution agree on random cases", "[signal_model][property]") {
  Rng rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 4096));
    const auto m = static_cast<std::size_t>(rng.uniform_int(1, 256));
    const auto x = oracle::random_sequence(rng, n);
    const auto h = oracle::random_sequence(rng, m);
    const auto fast = fft_convolve(x, h);
    const auto direct = oracle::convolve_direct(x, h);
    REQUIRE(fast.size() == direct.size());
    double max_err = 0.0;
    for (std::size_t i = 0; i < fast.size(); ++i) max_err = std::max(max_err, std::abs(fast[i] - direct[i]));
    CHECK(max_err < 1e-6);
  }
}

TEST_CASE("render_binaural is linear in the input", "[signal_model][property]") {
  Rng rng(5);
  MonauralClip raw = oracle::random_clip(rng, 500);
  HRIRPair hrir{oracle::random_sequence(rng, 64), oracle::random_sequence(rng, 64), 24000};
  MonauralClip scaled = raw;
  const double a = 3.7;
  for (auto& v : scaled.samples) v *= a;
  BinauralClip out1 = render_binaural(raw, hrir);
  BinauralClip out2 = render_binaural(scaled, hrir);
  for (std::size_t i = 0; i < out1.size(); ++i)
    CHECK(out2.left[i] == Approx(a * out1.left[i]).margin(1e-6));
}

TEST_CASE("mix_noise solves the SNR equation", "[signal_model]") {
  // per-channel energies 2 and 4, noise energy 1, snr 0 dB -> g^2 = 3
  BinauralClip binaural;
  binaural.left = {std::sqrt(2.0), 0.0};
  binaural.right = {2.0, 0.0};
  MonauralClip mono{{0.0, 0.0}, 24000};
  MonauralClip noise{{1.0, 0.0}, 24000};
  auto [mono_out, bin_out] = mix_noise(mono, binaural, noise, 0.0);
  const double g = mono_out.samples[0];  // mono was zero, so the delta is g*noise
  CHECK(g * g == Approx(3.0).margin(1e-12));

  SECTION("identical noise lands on all three tracks") {
    // the same g*noise value is added everywhere; recovering it by
    // subtraction can differ by one rounding step
    for (std::size_t i = 0; i < mono.size(); ++i) {
      const double delta = mono_out.samples[i] - mono.samples[i];
      CHECK(bin_out.left[i] - binaural.left[i] == Approx(delta).margin(1e-12));
      CHECK(bin_out.right[i] - binaural.right[i] == Approx(delta).margin(1e-12));
    }
  }

  SECTION("silent noise and silent binaural are rejected") {
    MonauralClip zero{{0.0, 0.0}, 24000};
    CHECK_THROWS_AS(mix_noise(mono, binaural, zero, 0.0), DomainError);
    BinauralClip silent{{0.0, 0.0}, {0.0, 0.0}, 24000};
    CHECK_THROWS_AS(mix_noise(mono, silent, noise, 0.0), DomainError);
  }
}

TEST_CASE("make_pair composes render, delay and noise", "[signal_model]") {
  HRIRSet hrirs = synth_hrir_set(4, 0.0875, 1.47, 24000, 192);
  Rng rng(9);
  SpatialScene scene;
  scene.event = oracle::random_clip(rng, 2400);
  scene.azimuth_deg = 90;

  SECTION("clean scene equals the two ops composed") {
    TrainingPair pair = make_pair(scene, hrirs);
    BinauralClip expect_target = render_binaural(scene.event, hrirs.at(90));
    MonauralClip expect_input = delay_input(scene.event, compute_delay(hrirs.distance_m, 343.0, 24000));
    CHECK(pair.target.left == expect_target.left);
    CHECK(pair.input.samples == expect_input.samples);
  }

  SECTION("noisy scene: the same g*noise shows up in all three deltas") {
    scene.noise = oracle::random_clip(rng, 2400);
    scene.snr_db = 0.0;
    TrainingPair noisy = make_pair(scene, hrirs);
    SpatialScene clean = scene;
    clean.noise.reset();
    clean.snr_db.reset();
    TrainingPair base = make_pair(clean, hrirs);
    for (std::size_t i = 0; i < 2400; i += 97) {
      const double d_mono = noisy.input.samples[i] - base.input.samples[i];
      const double d_left = noisy.target.left[i] - base.target.left[i];
      const double d_right = noisy.target.right[i] - base.target.right[i];
      CHECK(d_left == Approx(d_mono).margin(1e-12));
      CHECK(d_right == Approx(d_mono).margin(1e-12));
    }
  }

  SECTION("input does not depend on azimuth") {
    TrainingPair a = make_pair(scene, hrirs);
    SpatialScene other = scene;
    other.azimuth_deg = 180;
    TrainingPair b = make_pair(other, hrirs);
    CHECK(a.input.samples == b.input.samples);
    CHECK(a.target.left != b.target.left);
  }

  SECTION("unknown azimuth is rejected") {
    scene.azimuth_deg = 50;  // not in the 4-point set
    CHECK_THROWS_AS(make_pair(scene, hrirs), DomainError);
  }
}

TEST_CASE("delayed input peaks the cross-correlation at tau", "[signal_model][property]") {
  Rng rng(31);
  MonauralClip raw = oracle::random_clip(rng, 1200);
  const int tau = 103;
  MonauralClip delayed = delay_input(raw, tau);
  int best_lag = -1;
  double best = -1e300;
  for (int lag = 0; lag <= 256; ++lag) {
    double s = 0.0;
    for (std::size_t i = lag; i < delayed.size(); ++i) s += delayed.samples[i] * raw.samples[i - lag];
    if (s > best) {
      best = s;
      best_lag = lag;
    }
  }
  CHECK(best_lag == tau);
}

TEST_CASE("synth_hrir symmetry and cue conventions", "[signal_model]") {
  SECTION("azimuth 0 gives identical ears") {
    HRIRPair p = synth_hrir(0, 0.0875, 1.47, 24000, 256);
    CHECK(p.left == p.right);
  }

  SECTION("azimuth 90: left ear leads and carries more energy") {
    HRIRPair p = synth_hrir(90, 0.0875, 1.47, 24000, 256);
    CHECK(energy(p.left) > energy(p.right));
    // left onset strictly earlier
    auto onset = [](const std::vector<double>& ir) {
      const double peak = *std::max_element(ir.begin(), ir.end(), [](double a, double b) {
        return std::abs(a) < std::abs(b);
      });
      for (std::size_t i = 0; i < ir.size(); ++i)
        if (std::abs(ir[i]) > 0.1 * std::abs(peak)) return i;
      return ir.size();
    };
    CHECK(onset(p.left) < onset(p.right));
  }

  SECTION("mirrored azimuths swap ears exactly") {
    for (int az : {10, 40, 90, 170}) {
      HRIRPair a = synth_hrir(az, 0.0875, 1.47, 24000, 256);
      HRIRPair b = synth_hrir(360 - az, 0.0875, 1.47, 24000, 256);
      CHECK(a.left == b.right);
      CHECK(a.right == b.left);
    }
  }

  SECTION("front and back are spectrally distinct") {
    HRIRPair front = synth_hrir(40, 0.0875, 1.47, 24000, 256);
    HRIRPair back = synth_hrir(140, 0.0875, 1.47, 24000, 256);
    CHECK(front.left != back.left);
  }

  SECTION("invalid geometry is rejected") {
    CHECK_THROWS_AS(synth_hrir(0, -0.1, 1.47, 24000, 256), DomainError);
    CHECK_THROWS_AS(synth_hrir(0, 0.0875, 0.0, 24000, 256), DomainError);
    CHECK_THROWS_AS(synth_hrir(360, 0.0875, 1.47, 24000, 256), DomainError);
  }
}

TEST_CASE("HRIR manifest round-trip", "[signal_model]") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "audiospa_hrir_test";
  fs::remove_all(dir);
  HRIRSet set = synth_hrir_set(12, 0.0875, 1.47, 24000, 128);
  save_hrir_set(dir, set);
  HRIRSet loaded = load_hrir_set(dir / "manifest.json");
  REQUIRE(loaded.entries.size() == 12);
  CHECK(loaded.distance_m == Approx(set.distance_m));
  CHECK(loaded.sample_rate_hz == set.sample_rate_hz);
  for (const auto& [az, pair] : set.entries) {
    const HRIRPair& got = loaded.at(az);
    for (std::size_t i = 0; i < pair.left.size(); ++i) {
      CHECK(got.left[i] == Approx(pair.left[i]).margin(1e-7));   // float32 file quantization
      CHECK(got.right[i] == Approx(pair.right[i]).margin(1e-7));
    }
  }
  // a second round-trip is exact: float32 values survive unchanged
  const fs::path dir2 = fs::temp_directory_path() / "audiospa_hrir_test2";
  fs::remove_all(dir2);
  save_hrir_set(dir2, loaded);
  HRIRSet again = load_hrir_set(dir2 / "manifest.json");
  for (const auto& [az, pair] : loaded.entries) CHECK(again.at(az).left == pair.left);
  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST_CASE("36-point set is full and validated", "[signal_model]") {
  HRIRSet set = synth_hrir_set();
  CHECK(set.is_full());
  CHECK(set.ir_length() == 256);
  CHECK_NOTHROW(set.validate());
}

TEST_CASE("16-bit PCM WAV files read correctly", "[signal_model]") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "audiospa_pcm16_test.wav";

  // hand-rolled minimal PCM16 mono file: samples 0, 8192, -16384, 32767
  std::string body;
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) body.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  };
  auto u16 = [&](std::uint16_t v) {
    body.push_back(static_cast<char>(v & 0xFF));
    body.push_back(static_cast<char>((v >> 8) & 0xFF));
  };
  body.append("RIFF");
  u32(36 + 8);
  body.append("WAVEfmt ");
  u32(16);
  u16(1);  // PCM
  u16(1);  // mono
  u32(24000);
  u32(24000 * 2);
  u16(2);
  u16(16);
  body.append("data");
  u32(8);
  for (std::int16_t s : {std::int16_t(0), std::int16_t(8192), std::int16_t(-16384), std::int16_t(32767)})
    u16(static_cast<std::uint16_t>(s));
  write_text_atomic(path, body);

  WavData w = read_wav(path);
  REQUIRE(w.channels.size() == 1);
  REQUIRE(w.frames() == 4);
  CHECK(w.sample_rate_hz == 24000);
  CHECK(w.channels[0][0] == 0.0);
  CHECK(w.channels[0][1] == Approx(0.25).margin(1e-9));
  CHECK(w.channels[0][2] == Approx(-0.5).margin(1e-9));
  CHECK(w.channels[0][3] == Approx(32767.0 / 32768.0).margin(1e-9));
  fs::remove(path);
}
