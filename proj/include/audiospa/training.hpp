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
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "audiospa/augmentation.hpp"
#include "audiospa/backbone.hpp"
#include "audiospa/localizer.hpp"
#include "audiospa/metrics.hpp"
#include "audiospa/nn/checkpoint.hpp"
#include "audiospa/nn/loss.hpp"
#include "audiospa/nn/optim.hpp"

#include <json.hpp>

namespace audiospa {

struct TrainConfig {
  int max_epochs = 50;
  double lr_init = 1e-3;
  double lr_min = 1e-4;
  int lr_patience = 3;
  double lr_factor = 0.5;
  int early_stop_patience = 10;
  int batch_size = 16;
  double weight_decay = 1e-2;
  double grad_clip_norm = 5.0;  // <= 0 disables
  std::uint64_t seed = 0;
  std::string encoder_key = "stub";
  std::string pooling = "fmha";
  BackboneConfig backbone;
  SamplerConfig sampler;
  LocalizerConfig localizer;

  void validate() const {
    if (lr_min > lr_init) throw ConfigError("train: lr_min > lr_init");
    if (lr_patience < 1 || early_stop_patience < 1) throw ConfigError("train: patiences must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
    backbone.validate();
    sampler.validate();
  }

  nlohmann::json to_json() const {
    return nlohmann::json{
        {"max_epochs", max_epochs},
        {"lr_init", lr_init},
        {"lr_min", lr_min},
        {"lr_patience", lr_patience},
        {"lr_factor", lr_factor},
        {"early_stop_patience", early_stop_patience},
        {"batch_size", batch_size},
        {"weight_decay", weight_decay},
        {"grad_clip_norm", grad_clip_norm},
        {"seed", seed},
        {"encoder", encoder_key},
        {"pooling", pooling},
        {"backbone",
         {{"residual_channels", backbone.residual_channels},
          {"num_blocks", backbone.num_blocks},
          {"dilation_cycle", backbone.dilation_cycle},
          {"kernel_size", backbone.kernel_size},
          {"heads", backbone.heads}}},
        {"sampler",
         {{"snr_low_db", sampler.snr_low_db},
          {"snr_high_db", sampler.snr_high_db},
          {"segment_seconds", sampler.segment_seconds},
          {"noise_enabled", sampler.noise_enabled}}},
        {"localizer",
         {{"analysis_seconds", localizer.analysis_seconds},
          {"sample_rate_hz", localizer.sample_rate_hz},
          {"fft_size", localizer.stft.fft_size},
          {"hop", localizer.stft.hop}}}};
  }

  static TrainConfig from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.lr_init = j.value("lr_init", c.lr_init);
    c.lr_min = j.value("lr_min", c.lr_min);
    c.lr_patience = j.value("lr_patience", c.lr_patience);
    c.lr_factor = j.value("lr_factor", c.lr_factor);
    c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.grad_clip_norm = j.value("grad_clip_norm", c.grad_clip_norm);
    c.seed = j.value("seed", c.seed);
    c.encoder_key = j.value("encoder", c.encoder_key);
    c.pooling = j.value("pooling", c.pooling);
    if (j.contains("backbone")) {
      const auto& b = j.at("backbone");
      c.backbone.residual_channels = b.value("residual_channels", c.backbone.residual_channels);
      c.backbone.num_blocks = b.value("num_blocks", c.backbone.num_blocks);
      c.backbone.dilation_cycle = b.value("dilation_cycle", c.backbone.dilation_cycle);
      c.backbone.kernel_size = b.value("kernel_size", c.backbone.kernel_size);
      c.backbone.heads = b.value("heads", c.backbone.heads);
    }
    if (j.contains("sampler")) {
      const auto& s = j.at("sampler");
      c.sampler.snr_low_db = s.value("snr_low_db", c.sampler.snr_low_db);
      c.sampler.snr_high_db = s.value("snr_high_db", c.sampler.snr_high_db);
      c.sampler.segment_seconds = s.value("segment_seconds", c.sampler.segment_seconds);
      c.sampler.noise_enabled = s.value("noise_enabled", c.sampler.noise_enabled);
    }
    if (j.contains("localizer")) {
      const auto& l = j.at("localizer");
      c.localizer.analysis_seconds = l.value("analysis_seconds", c.localizer.analysis_seconds);
      c.localizer.sample_rate_hz = l.value("sample_rate_hz", c.localizer.sample_rate_hz);
      c.localizer.stft.fft_size = l.value("fft_size", c.localizer.stft.fft_size);
      c.localizer.stft.hop = l.value("hop", c.localizer.stft.hop);
    }
    return c;
  }
};

inline std::filesystem::path cache_dir() {
  const char* env = std::getenv("AUDIOSPA_CACHE");
  return env != nullptr && *env != '\0' ? std::filesystem::path(env) : std::filesystem::path("audiospa_cache");
}

// Validation-loss driven learning-rate decay and early stopping.
// Improvement means a relative decrease of at least rel_threshold; the decay
// counter resets on improvement and after each decay.
class PlateauSchedule {
 public:
  PlateauSchedule(double lr_init, double lr_min, double factor, int lr_patience, int stop_patience,
                  double rel_threshold = 1e-6)
      : lr_(lr_init), lr_min_(lr_min), factor_(factor), lr_patience_(lr_patience),
        stop_patience_(stop_patience), rel_(rel_threshold) {}

  struct Decision {
    bool improved = false;
    bool decayed = false;
    bool stop = false;
    double lr = 0.0;
  };

  Decision observe(double val_loss) {
    Decision d;
    if (val_loss <= best_ * (1.0 - rel_)) {
      best_ = val_loss;
      since_improve_ = 0;
      since_decay_ = 0;
      d.improved = true;
    } else {
      ++since_improve_;
      ++since_decay_;
      if (since_decay_ >= lr_patience_) {
        const double next = std::max(lr_min_, lr_ * factor_);
        d.decayed = next < lr_;
        lr_ = next;
        since_decay_ = 0;
      }
      if (since_improve_ >= stop_patience_) d.stop = true;
    }
    d.lr = lr_;
    return d;
  }

  double lr() const { return lr_; }
  double best() const { return best_; }

 private:
  double lr_, lr_min_, factor_;
  int lr_patience_, stop_patience_;
  double rel_;
  double best_ = std::numeric_limits<double>::infinity();
  int since_improve_ = 0;
  int since_decay_ = 0;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct DataBundle {
  const EventProvider* events = nullptr;
  const HRIRSet* hrirs = nullptr;
  const TemplateSet* templates = nullptr;
  const NoiseProvider* noise = nullptr;  // optional
  SamplerConfig sampler;
};

// Where training/eval examples come from. Sampled sources draw a fresh scene
// per (epoch, index); fixed sources always return the same example for an
// index, which is what overfit experiments need.
class ExampleSource {
 public:
  virtual ~ExampleSource() = default;
  virtual std::size_t size() const = 0;
  virtual TrainingExample get(std::int64_t epoch, std::int64_t index) const = 0;
};

class SampledExampleSource : public ExampleSource {
 public:
  explicit SampledExampleSource(DataBundle bundle, double speed_of_sound_mps = kDefaultSpeedOfSoundMps)
      : bundle_(std::move(bundle)), c_(speed_of_sound_mps) {}

  std::size_t size() const override { return bundle_.events->size(); }

  TrainingExample get(std::int64_t epoch, std::int64_t index) const override {
    SpatialScene scene = sample_scene(epoch, index, *bundle_.events, *bundle_.hrirs, *bundle_.templates,
                                      bundle_.noise, bundle_.sampler);
    return assemble_example(scene, *bundle_.hrirs, c_);
  }

  const DataBundle& bundle() const { return bundle_; }

 private:
  DataBundle bundle_;
  double c_;
};

class FixedExampleSource : public ExampleSource {
 public:
  explicit FixedExampleSource(std::vector<TrainingExample> examples) : examples_(std::move(examples)) {}

  std::size_t size() const override { return examples_.size(); }

  TrainingExample get(std::int64_t, std::int64_t index) const override {
    return examples_.at(static_cast<std::size_t>(index));
  }

 private:
  std::vector<TrainingExample> examples_;
};

template <typename ModelT>
struct TrainResult {
  ModelT model;
  int best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<EpochLog> logs;
  bool early_stopped = false;
};

namespace detail {

inline void append_log_line(const std::filesystem::path& path, const EpochLog& log) {
  if (path.empty()) return;
  std::ofstream out(path, std::ios::app);
  out << nlohmann::json{{"epoch", log.epoch},
                        {"train_loss", log.train_loss},
                        {"val_loss", log.val_loss},
                        {"lr", log.lr}}
             .dump()
      << "\n";
}

inline void dump_nan_state(const std::filesystem::path& log_path, const nlohmann::json& state) {
  if (log_path.empty()) return;
  write_text_atomic(log_path.parent_path() / "nan_dump.json", state.dump(2) + "\n");
}

template <typename Real>
std::vector<nn::Tensor<Real>> snapshot(const ParamList<Real>& params) {
  std::vector<nn::Tensor<Real>> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(*p.value);
  return out;
}

template <typename Real>
void restore(const ParamList<Real>& params, const std::vector<nn::Tensor<Real>>& snap) {
  for (std::size_t i = 0; i < params.size(); ++i) *params[i].value = snap[i];
}

}  // namespace detail

// Epoch callback; returning true stops training after the current epoch.
using EpochHook = std::function<bool(const EpochLog&)>;

namespace detail {

// Shared epoch loop: seeded shuffle, gradient accumulation over the batch,
// clip and step, fixed validation pass, plateau schedule, best-checkpoint
// snapshot. `run_example(source, epoch, index, learn)` returns the loss.
template <typename Real, typename ModelT, typename RunFn>
void run_harness(const TrainConfig& cfg, const ExampleSource& train_src, const ExampleSource& val_src,
                 ParamList<Real>& params, RunFn&& run_example, const std::filesystem::path& log_path,
                 const EpochHook& hook, TrainResult<ModelT>& result, const char* name) {
  nn::AdamW<Real> opt(params, cfg.weight_decay);
  PlateauSchedule schedule(cfg.lr_init, cfg.lr_min, cfg.lr_factor, cfg.lr_patience, cfg.early_stop_patience);

  const auto num_train = static_cast<std::int64_t>(train_src.size());
  const auto num_val = static_cast<std::int64_t>(val_src.size());
  if (num_train == 0 || num_val == 0) throw ConfigError(std::string(name) + ": empty example source");

  std::vector<nn::Tensor<Real>> best_params = snapshot(params);
  std::vector<std::int64_t> order(static_cast<std::size_t>(num_train));
  for (std::int64_t i = 0; i < num_train; ++i) order[static_cast<std::size_t>(i)] = i;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng order_rng = Rng::keyed({cfg.seed, fnv1a64("epoch-order"), static_cast<std::uint64_t>(epoch)});
    order_rng.shuffle(order.begin(), order.end());

    double train_loss_sum = 0.0;
    std::int64_t seen = 0;
    for (std::int64_t start = 0; start < num_train; start += cfg.batch_size) {
      nn::zero_grads(params);
      const std::int64_t stop = std::min<std::int64_t>(num_train, start + cfg.batch_size);
      double batch_loss = 0.0;
      for (std::int64_t i = start; i < stop; ++i)
        batch_loss += run_example(train_src, epoch, order[static_cast<std::size_t>(i)], true);
      const auto count = static_cast<double>(stop - start);
      if (!std::isfinite(batch_loss)) {
        dump_nan_state(log_path, nlohmann::json{{"trainer", name},
                                                {"epoch", epoch},
                                                {"batch_start", start},
                                                {"lr", schedule.lr()},
                                                {"loss", "non-finite"}});
        throw NumericError(std::string(name) + ": non-finite loss at epoch " + std::to_string(epoch));
      }
      nn::scale_grads(params, 1.0 / count);
      nn::clip_global_norm(params, cfg.grad_clip_norm);
      opt.step(params, schedule.lr());
      train_loss_sum += batch_loss;
      seen += stop - start;
    }

    // validation scenes are fixed: epoch key 0
    double val_loss_sum = 0.0;
    for (std::int64_t i = 0; i < num_val; ++i) val_loss_sum += run_example(val_src, 0, i, false);

    EpochLog log{epoch, train_loss_sum / static_cast<double>(seen), val_loss_sum / static_cast<double>(num_val),
                 schedule.lr()};
    const auto decision = schedule.observe(log.val_loss);
    result.logs.push_back(log);
    append_log_line(log_path, log);
    if (decision.improved) {
      best_params = snapshot(params);
      result.best_epoch = epoch;
      result.best_val_loss = log.val_loss;
    }
    if (hook && hook(log)) break;
    if (decision.stop) {
      result.early_stopped = true;
      break;
    }
  }
  restore(params, best_params);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Generator training

template <typename Real = float>
TrainResult<AudioSpaModel<Real>> train_audiospa(const TrainConfig& cfg, const ExampleSource& train_src,
                                                const ExampleSource& val_src,
                                                const std::filesystem::path& log_path = {},
                                                const EpochHook& hook = {}) {
  cfg.validate();
  auto encoder = make_encoder(cfg.encoder_key);
  AudioSpaModel<Real> model(cfg.backbone, encoder->dim(), cfg.encoder_key, pooling_from_string(cfg.pooling));
  Rng init_rng = Rng::keyed({cfg.seed, fnv1a64("audiospa-init")});
  model.init(init_rng);

  ParamList<Real> params;
  model.collect(params);

  auto run_example = [&](const ExampleSource& src, std::int64_t epoch, std::int64_t index, bool learn) {
    const TrainingExample ex = src.get(epoch, index);
    const TokenEmbeddings emb = encoder->encode(ex.prompt);
    const Tensor<Real> x = mono_to_tensor<Real>(ex.input);
    const Tensor<Real> y = binaural_to_tensor<Real>(ex.target);
    if (learn) {
      typename AudioSpaModel<Real>::Cache cache;
      Tensor<Real> yhat = model.forward(x, emb, &cache);
      const double loss = nn::l1_loss(yhat, y);
      Tensor<Real> g = nn::l1_loss_grad(yhat, y);
      model.backward(cache, g);
      return loss;
    }
    Tensor<Real> yhat = model.forward(x, emb);
    return nn::l1_loss(yhat, y);
  };

  TrainResult<AudioSpaModel<Real>> result;
  detail::run_harness<Real>(cfg, train_src, val_src, params, run_example, log_path, hook, result,
                            "train_audiospa");
  result.model = std::move(model);
  return result;
}

// ---------------------------------------------------------------------------
// Localizer training

template <typename Real = float>
TrainResult<LocalizationModel<Real>> train_localizer(const TrainConfig& cfg, const ExampleSource& train_src,
                                                     const ExampleSource& val_src,
                                                     const std::filesystem::path& log_path = {},
                                                     const EpochHook& hook = {}) {
  cfg.validate();
  LocalizationModel<Real> model(cfg.localizer);
  Rng init_rng = Rng::keyed({cfg.seed, fnv1a64("localizer-init")});
  model.init(init_rng);

  ParamList<Real> params;
  model.collect(params);

  auto run_example = [&](const ExampleSource& src, std::int64_t epoch, std::int64_t index, bool learn) {
    const TrainingExample ex = src.get(epoch, index);
    const BinauralFeatures feats = stft_features(fit_analysis_window(ex.target, model.cfg), model.cfg.stft);
    const Tensor<Real> target = doa_target<Real>({ex.azimuth_deg}, model.cfg.num_classes);
    if (learn) {
      typename LocalizationModel<Real>::Cache cache;
      Tensor<Real> prob = model.forward(feats, &cache);
      const double loss = nn::bce_loss(prob, target);
      model.backward(cache, prob, target);
      return loss;
    }
    Tensor<Real> prob = model.forward(feats);
    return nn::bce_loss(prob, target);
  };

  TrainResult<LocalizationModel<Real>> result;
  detail::run_harness<Real>(cfg, train_src, val_src, params, run_example, log_path, hook, result,
                            "train_localizer");
  result.model = std::move(model);
  return result;
}

// ---------------------------------------------------------------------------
// Persistence

template <typename Real>
void save_audiospa(const std::filesystem::path& path, AudioSpaModel<Real>& model, int epoch = 0,
                   double val_loss = 0.0, std::uint64_t rng_seed = 0) {
  ParamList<Real> params;
  model.collect(params);
  nn::save_tensors(path, params);
  nn::save_sidecar(path, nlohmann::json{{"kind", "audiospa"},
                                        {"config",
                                         {{"residual_channels", model.cfg.residual_channels},
                                          {"num_blocks", model.cfg.num_blocks},
                                          {"dilation_cycle", model.cfg.dilation_cycle},
                                          {"kernel_size", model.cfg.kernel_size},
                                          {"heads", model.cfg.heads}}},
                                        {"encoder_key", model.encoder_key},
                                        {"encoder_dim", model.conditioner.encoder_dim},
                                        {"pooling", pooling_to_string(model.conditioner.pooling)},
                                        {"epoch", epoch},
                                        {"val_loss", val_loss},
                                        {"rng_seed", rng_seed}});
}

template <typename Real>
AudioSpaModel<Real> load_audiospa(const std::filesystem::path& path) {
  const nlohmann::json meta = nn::load_sidecar(path);
  if (meta.value("kind", "") != "audiospa") throw DataError("not a generator checkpoint: " + path.string());
  const auto& c = meta.at("config");
  BackboneConfig cfg;
  cfg.residual_channels = c.at("residual_channels").get<int>();
  cfg.num_blocks = c.at("num_blocks").get<int>();
  cfg.dilation_cycle = c.at("dilation_cycle").get<int>();
  cfg.kernel_size = c.at("kernel_size").get<int>();
  cfg.heads = c.at("heads").get<int>();
  AudioSpaModel<Real> model(cfg, meta.at("encoder_dim").get<int>(), meta.at("encoder_key").get<std::string>(),
                            pooling_from_string(meta.value("pooling", "fmha")));
  ParamList<Real> params;
  model.collect(params);
  nn::load_tensors(path, params);
  return model;
}

template <typename Real>
void save_localizer(const std::filesystem::path& path, LocalizationModel<Real>& model, int epoch = 0,
                    double val_loss = 0.0, std::uint64_t rng_seed = 0) {
  ParamList<Real> params;
  model.collect(params);
  nn::save_tensors(path, params);
  nn::save_sidecar(path, nlohmann::json{{"kind", "localizer"},
                                        {"config",
                                         {{"fft_size", model.cfg.stft.fft_size},
                                          {"hop", model.cfg.stft.hop},
                                          {"analysis_seconds", model.cfg.analysis_seconds},
                                          {"sample_rate_hz", model.cfg.sample_rate_hz},
                                          {"num_classes", model.cfg.num_classes}}},
                                        {"epoch", epoch},
                                        {"val_loss", val_loss},
                                        {"rng_seed", rng_seed}});
}

template <typename Real>
LocalizationModel<Real> load_localizer(const std::filesystem::path& path) {
  const nlohmann::json meta = nn::load_sidecar(path);
  if (meta.value("kind", "") != "localizer") throw DataError("not a localizer checkpoint: " + path.string());
  const auto& c = meta.at("config");
  LocalizerConfig cfg;
  cfg.stft.fft_size = c.at("fft_size").get<int>();
  cfg.stft.hop = c.at("hop").get<int>();
  cfg.analysis_seconds = c.at("analysis_seconds").get<double>();
  cfg.sample_rate_hz = c.at("sample_rate_hz").get<int>();
  cfg.num_classes = c.at("num_classes").get<int>();
  LocalizationModel<Real> model(cfg);
  ParamList<Real> params;
  model.collect(params);
  nn::load_tensors(path, params);
  return model;
}

// ---------------------------------------------------------------------------
// Evaluation protocol

enum class EvalMode { kGenerated, kGroundTruth, kMonoInput };

inline EvalMode eval_mode_from_string(const std::string& s) {
  if (s == "generated" || s == "none") return EvalMode::kGenerated;
  if (s == "ground-truth") return EvalMode::kGroundTruth;
  if (s == "mono") return EvalMode::kMonoInput;
  throw ConfigError("unknown eval mode: " + s);
}

/// Runs the coupled protocol over `count` scenes: build the pair, produce the
/// judged audio per mode, localize it, and score MAE/ACC against the prompt
/// azimuth plus SDR/SISDR against the (possibly noisy) target.
template <typename Real>
EvalReport evaluate(const AudioSpaModel<Real>* generator, const TextEncoder* encoder,
                    const LocalizationModel<Real>& loc_model, const ExampleSource& scenes, std::int64_t count,
                    EvalMode mode = EvalMode::kGenerated, const std::string& snr_condition = "clean") {
  if (count <= 0) throw DomainError("evaluate: empty scene set");
  if (mode == EvalMode::kGenerated) {
    if (generator == nullptr || encoder == nullptr) throw ConfigError("evaluate: generator mode needs a model");
    if (encoder->key() != generator->encoder_key)
      throw DataError("encoder mismatch: checkpoint wants '" + generator->encoder_key + "', runtime has '" +
                      encoder->key() + "'");
  }
  const auto pool = static_cast<std::int64_t>(scenes.size());
  if (pool == 0) throw DomainError("evaluate: empty scene set");
  EvalReport report;
  report.records.resize(static_cast<std::size_t>(count));
  report.snr_condition = snr_condition;
  std::string first_error;
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      TrainingExample ex = scenes.get(i / pool, i % pool);
      BinauralClip judged;
      switch (mode) {
        case EvalMode::kGenerated: {
          const TokenEmbeddings emb = encoder->encode(ex.prompt);
          const Tensor<Real> x = mono_to_tensor<Real>(ex.input);
          judged = tensor_to_binaural(generator->forward(x, emb), ex.input.sample_rate_hz);
          break;
        }
        case EvalMode::kGroundTruth:
          judged = ex.target;
          break;
        case EvalMode::kMonoInput:
          judged = BinauralClip{ex.input.samples, ex.input.samples, ex.input.sample_rate_hz};
          break;
      }
      auto [azimuths, posterior] = localize(loc_model, judged, 1);
      EvalRecord rec;
      rec.azimuth_true = ex.azimuth_deg;
      rec.azimuth_pred = azimuths.front();
      rec.mae_deg = doa_mae(rec.azimuth_pred, rec.azimuth_true);
      rec.correct = rec.azimuth_pred == rec.azimuth_true;
      rec.sdr_db = sdr(judged, ex.target);
      rec.sisdr_db = sisdr(judged, ex.target);
      report.records[static_cast<std::size_t>(i)] = rec;
    } catch (const std::exception& e) {
#pragma omp critical
      if (first_error.empty()) first_error = e.what();
    }
  }
  if (!first_error.empty()) throw Error("evaluate: " + first_error);
  return report;
}

}  // namespace audiospa
