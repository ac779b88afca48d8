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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include "audiospa/augmentation.hpp"
#include "audiospa/backbone.hpp"
#include "audiospa/localizer.hpp"
#include "audiospa/metrics.hpp"
#include "audiospa/signal_model.hpp"
#include "audiospa/synthetic.hpp"
#include "audiospa/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using namespace audiospa;
namespace fs = std::filesystem;

bool g_json_errors = false;

// Exit codes: 0 success, 1 usage, 2 data, 3 runtime.
int report_error(const std::exception& e, int code) {
  const char* type = code == 2 ? "data" : "runtime";
  if (g_json_errors) {
    std::cerr << nlohmann::json{{"error", e.what()}, {"type", type}}.dump() << "\n";
  } else {
    std::cerr << "error: " << e.what() << "\n";
  }
  return code;
}

int run_guarded(const std::function<void()>& fn) {
  try {
    fn();
    return 0;
  } catch (const DomainError& e) {
    return report_error(e, 2);
  } catch (const DataError& e) {
    return report_error(e, 2);
  } catch (const ConfigError& e) {
    return report_error(e, 2);
  } catch (const std::exception& e) {
    return report_error(e, 3);
  }
}

// Event source spec: "synthetic:<count>x<seconds>" or a catalog manifest path.
std::unique_ptr<EventProvider> make_events(const std::string& spec, std::uint64_t seed, int rate) {
  if (spec.rfind("synthetic:", 0) == 0) {
    const std::string body = spec.substr(10);
    const auto x = body.find('x');
    if (x == std::string::npos) throw ConfigError("bad synthetic event spec (want synthetic:<count>x<seconds>)");
    const auto count = static_cast<std::size_t>(std::stoll(body.substr(0, x)));
    const double seconds = std::stod(body.substr(x + 1));
    return std::make_unique<SyntheticEventSource>(count, seconds, seed, rate);
  }
  return std::make_unique<CatalogEventSource>(EventCatalog::load(spec));
}

// Noise spec: "none", "synthetic", or a directory of WAV files.
std::unique_ptr<NoiseProvider> make_noise(const std::string& spec, std::uint64_t seed) {
  if (spec.empty() || spec == "none") return nullptr;
  if (spec == "synthetic") return std::make_unique<SyntheticNoiseSource>(seed);
  return std::make_unique<DirNoisePool>(spec);
}

TrainConfig load_train_config(const std::string& path) {
  if (path.empty()) return TrainConfig{};
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError("bad config JSON: " + std::string(e.what()));
  }
  return TrainConfig::from_json(j);
}

struct SceneSetSpec {
  std::string hrirs;
  std::string templates;
  std::string events;
  std::string noise = "none";
  SamplerConfig sampler;
  std::uint64_t seed = 0;
  std::int64_t count = 100;
};

SceneSetSpec load_scene_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open scene set: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError("bad scene set JSON: " + std::string(e.what()));
  }
  SceneSetSpec s;
  s.hrirs = j.at("hrirs").get<std::string>();
  s.templates = j.at("templates").get<std::string>();
  s.events = j.at("events").get<std::string>();
  s.noise = j.value("noise", s.noise);
  s.seed = j.value("seed", s.seed);
  s.count = j.value("count", s.count);
  if (j.contains("sampler")) {
    const auto& sp = j.at("sampler");
    s.sampler.snr_low_db = sp.value("snr_low_db", s.sampler.snr_low_db);
    s.sampler.snr_high_db = sp.value("snr_high_db", s.sampler.snr_high_db);
    s.sampler.segment_seconds = sp.value("segment_seconds", s.sampler.segment_seconds);
    s.sampler.noise_enabled = sp.value("noise_enabled", s.sampler.noise_enabled);
  }
  s.sampler.seed = s.seed;
  return s;
}

fs::path default_out(const std::string& name) {
  const fs::path dir = cache_dir();
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"text-conditioned binaural spatialization toolkit"};
  app.require_subcommand(1);
  app.add_flag("--json", g_json_errors, "emit machine-readable errors on stderr");

  // ---- synth-hrirs ----
  auto* synth = app.add_subcommand("synth-hrirs", "write a synthetic spherical-head HRIR set");
  std::string synth_out;
  int synth_azimuths = 36, synth_rate = 24000, synth_length = 256;
  double synth_radius = 0.0875, synth_distance = kDefaultHrirDistanceM;
  std::uint64_t synth_seed = 0;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--azimuths", synth_azimuths, "number of azimuths (divides 36)");
  synth->add_option("--radius", synth_radius, "head radius in meters");
  synth->add_option("--distance", synth_distance, "source distance in meters");
  synth->add_option("--rate", synth_rate, "sample rate in Hz");
  synth->add_option("--length", synth_length, "impulse response length in samples");
  synth->add_option("--seed", synth_seed, "unused; accepted for interface uniformity");

  // ---- render ----
  auto* render = app.add_subcommand("render", "render ground-truth binaural audio by HRIR convolution");
  std::string render_mono, render_hrirs, render_noise, render_out;
  int render_azimuth = 0;
  double render_snr = 0.0;
  bool render_emit_input = false;
  std::uint64_t render_seed = 0;
  render->add_option("--mono", render_mono, "monaural event WAV")->required();
  render->add_option("--azimuth", render_azimuth, "azimuth in degrees")->required();
  render->add_option("--hrirs", render_hrirs, "HRIR manifest JSON")->required();
  auto* render_snr_opt = render->add_option("--snr", render_snr, "SNR in dB (requires --noise)");
  render->add_option("--noise", render_noise, "noise WAV to mix");
  render->add_option("--out", render_out, "output binaural WAV")->required();
  render->add_flag("--emit-input", render_emit_input, "also write the delayed mono input");
  render->add_option("--seed", render_seed, "unused; accepted for interface uniformity");

  // ---- spatialize ----
  auto* spat = app.add_subcommand("spatialize", "run the generator on a mono clip and a prompt");
  std::string spat_mono, spat_prompt, spat_ckpt, spat_out, spat_encoder;
  std::uint64_t spat_seed = 0;
  spat->add_option("--mono", spat_mono, "monaural input WAV")->required();
  spat->add_option("--prompt", spat_prompt, "text prompt")->required();
  spat->add_option("--ckpt", spat_ckpt, "generator checkpoint")->required();
  spat->add_option("--out", spat_out, "output binaural WAV")->required();
  spat->add_option("--encoder", spat_encoder, "override encoder key (must match checkpoint)");
  spat->add_option("--seed", spat_seed, "unused; inference is deterministic");

  // ---- localize ----
  auto* loc = app.add_subcommand("localize", "estimate source azimuths from binaural audio");
  std::string loc_audio, loc_ckpt;
  int loc_sources = 1;
  std::uint64_t loc_seed = 0;
  loc->add_option("--audio", loc_audio, "2-channel WAV")->required();
  loc->add_option("--ckpt", loc_ckpt, "localizer checkpoint")->required();
  loc->add_option("--sources", loc_sources, "number of sources to decode");
  loc->add_option("--seed", loc_seed, "unused; inference is deterministic");

  // ---- evaluate ----
  auto* eval = app.add_subcommand("evaluate", "run the coupled generator/localizer evaluation protocol");
  std::string eval_gen, eval_loc, eval_scenes, eval_report, eval_csv, eval_baseline = "generated";
  int eval_workers = 0;
  eval->add_option("--gen-ckpt", eval_gen, "generator checkpoint (unused for baselines)");
  eval->add_option("--loc-ckpt", eval_loc, "localizer checkpoint")->required();
  eval->add_option("--scenes", eval_scenes, "scene set JSON")->required();
  eval->add_option("--report", eval_report, "output report JSON");
  eval->add_option("--csv", eval_csv, "output CSV (defaults to report path with .csv)");
  eval->add_option("--baseline", eval_baseline, "generated | ground-truth | mono");
  eval->add_option("--workers", eval_workers, "evaluation thread count (0 = default)");

  // ---- train ----
  auto* train = app.add_subcommand("train", "train the generator");
  std::string train_config, train_events, train_val_events, train_hrirs, train_templates, train_noise = "none";
  std::string train_out, train_log;
  TrainConfig train_overrides;
  bool has_cfg_flag = false;
  train->add_option("--config", train_config, "training config JSON");
  train->add_option("--events", train_events, "event source (catalog path or synthetic:<n>x<sec>)")->required();
  train->add_option("--val-events", train_val_events, "validation event source (defaults to --events)");
  train->add_option("--hrirs", train_hrirs, "HRIR manifest JSON")->required();
  train->add_option("--templates", train_templates, "template file")->required();
  train->add_option("--noise", train_noise, "noise source (none | synthetic | directory)");
  train->add_option("--out", train_out, "output checkpoint path");
  train->add_option("--log", train_log, "JSON-lines training log path");
  // every config field is overridable from the command line
  auto* o_epochs = train->add_option("--max-epochs", train_overrides.max_epochs);
  auto* o_lr = train->add_option("--lr-init", train_overrides.lr_init);
  auto* o_lrmin = train->add_option("--lr-min", train_overrides.lr_min);
  auto* o_lrpat = train->add_option("--lr-patience", train_overrides.lr_patience);
  auto* o_lrfac = train->add_option("--lr-factor", train_overrides.lr_factor);
  auto* o_stop = train->add_option("--early-stop-patience", train_overrides.early_stop_patience);
  auto* o_batch = train->add_option("--batch-size", train_overrides.batch_size);
  auto* o_wd = train->add_option("--weight-decay", train_overrides.weight_decay);
  auto* o_clip = train->add_option("--grad-clip-norm", train_overrides.grad_clip_norm);
  auto* o_seed = train->add_option("--seed", train_overrides.seed);
  auto* o_enc = train->add_option("--encoder", train_overrides.encoder_key);
  auto* o_pool = train->add_option("--pooling", train_overrides.pooling);
  auto* o_d = train->add_option("--residual-channels", train_overrides.backbone.residual_channels);
  auto* o_b = train->add_option("--num-blocks", train_overrides.backbone.num_blocks);
  auto* o_seg = train->add_option("--segment-seconds", train_overrides.sampler.segment_seconds);
  auto* o_snrlo = train->add_option("--snr-low", train_overrides.sampler.snr_low_db);
  auto* o_snrhi = train->add_option("--snr-high", train_overrides.sampler.snr_high_db);
  (void)has_cfg_flag;

  // ---- train-localizer ----
  auto* trainloc = app.add_subcommand("train-localizer", "train the binaural DOA classifier");
  std::string tl_config, tl_events, tl_val_events, tl_hrirs, tl_templates, tl_noise = "none";
  std::string tl_out, tl_log;
  trainloc->add_option("--config", tl_config, "training config JSON");
  trainloc->add_option("--events", tl_events, "event source")->required();
  trainloc->add_option("--val-events", tl_val_events, "validation event source (defaults to --events)");
  trainloc->add_option("--hrirs", tl_hrirs, "HRIR manifest JSON")->required();
  trainloc->add_option("--templates", tl_templates, "template file")->required();
  trainloc->add_option("--noise", tl_noise, "noise source (none | synthetic | directory)");
  trainloc->add_option("--out", tl_out, "output checkpoint path");
  trainloc->add_option("--log", tl_log, "JSON-lines training log path");

  // ---- make-events ----
  auto* mkev = app.add_subcommand("make-events", "write a synthetic event catalog");
  std::string mkev_out;
  int mkev_count = 100, mkev_rate = 24000;
  double mkev_seconds = 2.0;
  std::uint64_t mkev_seed = 0;
  mkev->add_option("--out", mkev_out, "output directory")->required();
  mkev->add_option("--count", mkev_count, "number of events");
  mkev->add_option("--seconds", mkev_seconds, "event duration");
  mkev->add_option("--rate", mkev_rate, "sample rate in Hz");
  mkev->add_option("--seed", mkev_seed, "generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  }

  if (synth->parsed()) {
    return run_guarded([&] {
      HRIRSet set = synth_hrir_set(synth_azimuths, synth_radius, synth_distance, synth_rate, synth_length);
      save_hrir_set(synth_out, set);
      std::cout << "wrote " << set.entries.size() << " HRIRs + manifest to " << synth_out << "\n";
    });
  }

  if (render->parsed()) {
    return run_guarded([&] {
      const HRIRSet hrirs = load_hrir_set(fs::path(render_hrirs));
      SpatialScene scene;
      scene.event = load_mono_wav(render_mono);
      scene.azimuth_deg = render_azimuth;
      if (!render_noise.empty()) {
        if (render_snr_opt->count() == 0) throw DomainError("--noise requires --snr");
        MonauralClip noise = load_mono_wav(render_noise);
        if (noise.samples.size() < scene.event.samples.size())
          throw DomainError("noise clip shorter than event clip");
        noise.samples.resize(scene.event.samples.size());
        scene.noise = std::move(noise);
        scene.snr_db = render_snr;
      } else if (render_snr_opt->count() > 0) {
        throw DomainError("--snr requires --noise");
      }
      TrainingPair pair = make_pair(scene, hrirs);
      save_wav(render_out, pair.target);
      if (render_emit_input) {
        fs::path input_path = fs::path(render_out);
        input_path.replace_extension(".input.wav");
        save_wav(input_path, pair.input);
        std::cout << "wrote " << render_out << " and " << input_path.string() << "\n";
      } else {
        std::cout << "wrote " << render_out << "\n";
      }
    });
  }

  if (spat->parsed()) {
    return run_guarded([&] {
      AudioSpaModel<float> model = load_audiospa<float>(spat_ckpt);
      const std::string key = spat_encoder.empty() ? model.encoder_key : spat_encoder;
      auto encoder = make_encoder(key);
      const MonauralClip mono = load_mono_wav(spat_mono);
      const BinauralClip out = spatialize(model, *encoder, mono, spat_prompt);
      save_wav(spat_out, out);
      std::cout << "wrote " << spat_out << "\n";
    });
  }

  if (loc->parsed()) {
    return run_guarded([&] {
      LocalizationModel<float> model = load_localizer<float>(loc_ckpt);
      const BinauralClip audio = load_binaural_wav(loc_audio);
      auto [azimuths, posterior] = localize(model, audio, loc_sources);
      std::cout << nlohmann::json{{"azimuths", azimuths}, {"posterior", posterior}}.dump() << "\n";
    });
  }

  if (eval->parsed()) {
    return run_guarded([&] {
#ifdef _OPENMP
      if (eval_workers > 0) omp_set_num_threads(eval_workers);
#endif
      const SceneSetSpec spec = load_scene_set(eval_scenes);
      const HRIRSet hrirs = load_hrir_set(fs::path(spec.hrirs));
      const TemplateSet templates = TemplateSet::load(spec.templates);
      auto events = make_events(spec.events, spec.seed, hrirs.sample_rate_hz);
      auto noise = make_noise(spec.noise, spec.seed);
      const SampledExampleSource scenes(DataBundle{events.get(), &hrirs, &templates, noise.get(), spec.sampler});
      const std::string snr_condition =
          spec.sampler.noise_enabled && noise != nullptr
              ? "uniform[" + std::to_string(spec.sampler.snr_low_db) + "," +
                    std::to_string(spec.sampler.snr_high_db) + "]dB"
              : "clean";

      LocalizationModel<float> loc_model = load_localizer<float>(eval_loc);
      const EvalMode mode = eval_mode_from_string(eval_baseline);
      EvalReport report;
      if (mode == EvalMode::kGenerated) {
        if (eval_gen.empty()) throw DataError("--gen-ckpt required unless a baseline is selected");
        AudioSpaModel<float> gen = load_audiospa<float>(eval_gen);
        auto encoder = make_encoder(gen.encoder_key);
        report = evaluate(&gen, encoder.get(), loc_model, scenes, spec.count, mode, snr_condition);
        report.generator_checkpoint = eval_gen;
      } else {
        report = evaluate<float>(nullptr, nullptr, loc_model, scenes, spec.count, mode, snr_condition);
        report.generator_checkpoint = eval_baseline;
      }
      report.localizer_checkpoint = eval_loc;
      report.dataset_id = eval_scenes;
      const fs::path report_path = eval_report.empty() ? default_out("eval_report.json") : fs::path(eval_report);
      write_text_atomic(report_path, report.to_json().dump(2) + "\n");
      fs::path csv_path = eval_csv.empty() ? fs::path(report_path).replace_extension(".csv") : fs::path(eval_csv);
      write_text_atomic(csv_path, report.to_csv());
      std::cout << "MAE " << report.mean_mae() << "  ACC " << report.acc_percent() << "%  SDR " << report.mean_sdr()
                << " dB  SISDR " << report.mean_sisdr() << " dB\n"
                << "wrote " << report_path.string() << " and " << csv_path.string() << "\n";
    });
  }

  auto apply_train_overrides = [&](TrainConfig& cfg) {
    if (o_epochs->count()) cfg.max_epochs = train_overrides.max_epochs;
    if (o_lr->count()) cfg.lr_init = train_overrides.lr_init;
    if (o_lrmin->count()) cfg.lr_min = train_overrides.lr_min;
    if (o_lrpat->count()) cfg.lr_patience = train_overrides.lr_patience;
    if (o_lrfac->count()) cfg.lr_factor = train_overrides.lr_factor;
    if (o_stop->count()) cfg.early_stop_patience = train_overrides.early_stop_patience;
    if (o_batch->count()) cfg.batch_size = train_overrides.batch_size;
    if (o_wd->count()) cfg.weight_decay = train_overrides.weight_decay;
    if (o_clip->count()) cfg.grad_clip_norm = train_overrides.grad_clip_norm;
    if (o_seed->count()) cfg.seed = train_overrides.seed;
    if (o_enc->count()) cfg.encoder_key = train_overrides.encoder_key;
    if (o_pool->count()) cfg.pooling = train_overrides.pooling;
    if (o_d->count()) cfg.backbone.residual_channels = train_overrides.backbone.residual_channels;
    if (o_b->count()) cfg.backbone.num_blocks = train_overrides.backbone.num_blocks;
    if (o_seg->count()) cfg.sampler.segment_seconds = train_overrides.sampler.segment_seconds;
    if (o_snrlo->count()) cfg.sampler.snr_low_db = train_overrides.sampler.snr_low_db;
    if (o_snrhi->count()) cfg.sampler.snr_high_db = train_overrides.sampler.snr_high_db;
  };

  if (train->parsed()) {
    return run_guarded([&] {
      TrainConfig cfg = load_train_config(train_config);
      apply_train_overrides(cfg);
      cfg.sampler.seed = cfg.seed;
      const HRIRSet hrirs = load_hrir_set(fs::path(train_hrirs));
      const TemplateSet templates = TemplateSet::load(train_templates);
      auto events = make_events(train_events, cfg.seed, hrirs.sample_rate_hz);
      auto val_events = make_events(train_val_events.empty() ? train_events : train_val_events,
                                    cfg.seed + 1, hrirs.sample_rate_hz);
      auto noise = make_noise(train_noise, cfg.seed);
      SamplerConfig val_sampler = cfg.sampler;
      val_sampler.seed = hash_combine(cfg.seed, fnv1a64("val"));
      const SampledExampleSource train_source(DataBundle{events.get(), &hrirs, &templates, noise.get(), cfg.sampler});
      const SampledExampleSource val_source(DataBundle{val_events.get(), &hrirs, &templates, noise.get(), val_sampler});
      const fs::path log_path = train_log.empty() ? default_out("audiospa_train.jsonl") : fs::path(train_log);
      auto result = train_audiospa<float>(cfg, train_source, val_source, log_path);
      const fs::path out = train_out.empty() ? default_out("audiospa.ckpt") : fs::path(train_out);
      save_audiospa(out, result.model, result.best_epoch, result.best_val_loss, cfg.seed);
      std::cout << "best epoch " << result.best_epoch << " val_loss " << result.best_val_loss << "\nwrote "
                << out.string() << "\n";
    });
  }

  if (trainloc->parsed()) {
    return run_guarded([&] {
      TrainConfig cfg = load_train_config(tl_config);
      cfg.sampler.seed = cfg.seed;
      const HRIRSet hrirs = load_hrir_set(fs::path(tl_hrirs));
      const TemplateSet templates = TemplateSet::load(tl_templates);
      auto events = make_events(tl_events, cfg.seed, hrirs.sample_rate_hz);
      auto val_events =
          make_events(tl_val_events.empty() ? tl_events : tl_val_events, cfg.seed + 1, hrirs.sample_rate_hz);
      auto noise = make_noise(tl_noise, cfg.seed);
      SamplerConfig val_sampler = cfg.sampler;
      val_sampler.seed = hash_combine(cfg.seed, fnv1a64("val"));
      const SampledExampleSource train_source(DataBundle{events.get(), &hrirs, &templates, noise.get(), cfg.sampler});
      const SampledExampleSource val_source(DataBundle{val_events.get(), &hrirs, &templates, noise.get(), val_sampler});
      const fs::path log_path = tl_log.empty() ? default_out("localizer_train.jsonl") : fs::path(tl_log);
      auto result = train_localizer<float>(cfg, train_source, val_source, log_path);
      const fs::path out = tl_out.empty() ? default_out("localizer.ckpt") : fs::path(tl_out);
      save_localizer(out, result.model, result.best_epoch, result.best_val_loss, cfg.seed);
      std::cout << "best epoch " << result.best_epoch << " val_loss " << result.best_val_loss << "\nwrote "
                << out.string() << "\n";
    });
  }

  if (mkev->parsed()) {
    return run_guarded([&] {
      fs::create_directories(mkev_out);
      nlohmann::json manifest = nlohmann::json::array();
      for (int i = 0; i < mkev_count; ++i) {
        const LabeledClip ev = synth_event(mkev_seed, i, mkev_seconds, mkev_rate);
        const std::string name = "event_" + std::to_string(i) + ".wav";
        save_wav(fs::path(mkev_out) / name, ev.clip);
        manifest.push_back({{"file", name}, {"labels", ev.labels}});
      }
      write_text_atomic(fs::path(mkev_out) / "catalog.json", manifest.dump(2) + "\n");
      std::cout << "wrote " << mkev_count << " events + catalog to " << mkev_out << "\n";
    });
  }

  return 0;
}
