#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "eigenet/dataset/sampling.hpp"
#include "eigenet/nn/adam.hpp"
#include "eigenet/nn/checkpoint.hpp"
#include "eigenet/trainer/context.hpp"
#include "eigenet/trainer/loss.hpp"

namespace eigenet::trainer {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kModelNamespace = "eigenet";

/// A model architecture together with its float parameters.
struct ModelState {
  ModelConfig cfg;
  nn::ParamStore<float> params;
  EigeNet net;

  static ModelState create(const ModelConfig& cfg, std::uint64_t seed) {
    ModelState s;
    s.cfg = cfg;
    s.net = EigeNet(nn::Scope<float>(s.params, Rng(seed).split("model-init")), cfg);
    return s;
  }

  /// Rebuilds the architecture and copies `loaded` into it after checking
  /// that every block name and shape agrees.
  static ModelState from_params(const ModelConfig& cfg, const nn::ParamStore<float>& loaded) {
    ModelState s = create(cfg, 0);
    s.params.assign_from(loaded);
    return s;
  }
};

struct TrainConfig {
  int steps = 2000;
  int batch = 4;
  /// Reference count per example is drawn uniformly from [k_min, k_max].
  int k_min = 1;
  int k_max = 8;
  nn::AdamConfig adam{};
  LossConfig loss{};
  int log_every = 10;
  /// Validation metrics every this many steps on `val_examples` fixed examples; 0 disables.
  int eval_every = 0;
  int val_examples = 40;
  std::uint64_t seed = 0;

  void validate() const {
    require(steps > 0 && batch > 0 && log_every > 0, ErrorKind::ConfigInvalid, "steps, batch, log_every > 0");
    require(k_min >= 1 && k_max >= k_min, ErrorKind::ConfigInvalid, "need 1 <= k_min <= k_max");
    loss.validate();
  }
};

inline void to_json(json& j, const TrainConfig& c) {
  j = {{"steps", c.steps},         {"batch", c.batch},         {"k_min", c.k_min},
       {"k_max", c.k_max},         {"adam", c.adam},           {"loss", c.loss},
       {"log_every", c.log_every}, {"eval_every", c.eval_every}, {"val_examples", c.val_examples},
       {"seed", c.seed}};
}
inline void from_json(const json& j, TrainConfig& c) {
  const TrainConfig d;
  c.steps = j.value("steps", d.steps);
  c.batch = j.value("batch", d.batch);
  c.k_min = j.value("k_min", d.k_min);
  c.k_max = j.value("k_max", d.k_max);
  c.adam = j.value("adam", d.adam);
  c.loss = j.value("loss", d.loss);
  c.log_every = j.value("log_every", d.log_every);
  c.eval_every = j.value("eval_every", d.eval_every);
  c.val_examples = j.value("val_examples", d.val_examples);
  c.seed = j.value("seed", d.seed);
}

/// One structured training-log row (written as a JSON line).
struct TrainLogRow {
  std::string kind = "train";
  int step = 0;
  double loss = 0.0;
  LossTerms terms;
  double grad_norm = 0.0;
  double seconds = 0.0;
  json validation;
};

inline void to_json(json& j, const TrainLogRow& r) {
  j = {{"kind", r.kind}, {"step", r.step}, {"seconds", r.seconds}};
  if (r.kind == "train") {
    j["loss"] = r.loss;
    j["mrstft"] = r.terms.mrstft;
    j["edc"] = r.terms.edc;
    j["spectrum"] = r.terms.spectrum;
    j["warmup_weight"] = r.terms.weight;
    j["grad_norm"] = r.grad_norm;
  } else {
    j["metrics"] = r.validation;
  }
}

/// Loss of one example, with gradients flowing into `ps` on backward.
template <typename T>
Var<T> example_loss(const EigeNet& net, const nn::ParamStore<T>& ps, const model::DecoderRef<T>& decoder,
                    const SceneCache& cache, const data::Example& ex, long step, const LossConfig& cfg,
                    LossTerms* terms = nullptr) {
  auto pred = predict(net, ps, decoder, cache, ex);
  auto h = ad::constant<T>(cache.waveforms[ex.target_index].template cast<T>());
  Var<T> s;
  if (pred.spectrum.defined()) {
    require(ex.target_index < cache.spectra.size(), ErrorKind::MissingSpectrumTarget,
            "scene cache holds no spectrum targets");
    s = ad::constant<T>(cache.spectra[ex.target_index].template cast<T>());
  }
  return total_loss<T>(pred.rir, h, pred.spectrum, s, step, cfg, terms);
}

/// Fixed validation examples: K = k_max references, seeded.
inline std::vector<data::Example> validation_examples(const std::vector<SceneCache>& caches, int count, int k,
                                                      std::uint64_t seed) {
  std::vector<data::Example> out;
  if (caches.empty()) return out;
  Rng rng = Rng(seed).split("validation");
  for (int i = 0; i < count; ++i) {
    const auto& c = caches[static_cast<std::size_t>(i) % caches.size()];
    out.push_back(data::sample_example(*c.scene, static_cast<std::size_t>(k), rng));
  }
  return out;
}

struct TrainResult {
  ModelState model;
  std::vector<TrainLogRow> log;
};

using LogSink = std::function<void(const TrainLogRow&)>;

/// Adam on every model parameter; the codec is held outside the model store
/// and never updated. Deterministic for a fixed seed.
inline TrainResult train(const ModelConfig& mc, const std::vector<SceneCache>& train_set,
                         const codec::FrozenCodec& codec, const TrainConfig& tc,
                         const std::vector<SceneCache>& val_set = {}, const LogSink& sink = {}) {
  tc.validate();
  require(!train_set.empty(), ErrorKind::EmptyInput, "training needs at least one scene");
  require(mc.codec_latent_dim == codec.arch().config().latent_dim, ErrorKind::ShapeMismatch,
          "model codec_latent_dim differs from the codec");
  TrainResult result{ModelState::create(mc, tc.seed), {}};
  auto& ps = result.model.params;
  const auto& net = result.model.net;
  const model::DecoderRef<float> decoder{&codec.arch(), &codec.params()};
  nn::Adam<float> opt(tc.adam);
  Rng rng = Rng(tc.seed).split("train-batches");
  const auto val = validation_examples(val_set, tc.val_examples, tc.k_max, tc.seed);
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
  auto emit = [&](TrainLogRow row) {
    if (sink) sink(row);
    result.log.push_back(std::move(row));
  };

  double acc = 0.0, acc_norm = 0.0;
  LossTerms acc_terms;
  int acc_n = 0;
  for (int step = 1; step <= tc.steps; ++step) {
    ps.set_training(true);
    double batch_loss = 0.0;
    LossTerms batch_terms;
    for (int b = 0; b < tc.batch; ++b) {
      const auto& cache = train_set[rng.below(train_set.size())];
      const auto k = static_cast<std::size_t>(tc.k_min) +
                     rng.below(static_cast<std::size_t>(tc.k_max - tc.k_min + 1));
      const auto ex = data::sample_example(*cache.scene, k, rng);
      LossTerms t;
      auto loss = example_loss<float>(net, ps, decoder, cache, ex, step - 1, tc.loss, &t);
      require(std::isfinite(loss.item()), ErrorKind::NonFiniteLoss,
              "non-finite loss at step " + std::to_string(step) + " batch item " + std::to_string(b) + " (" +
                  cache.scene->scene_id + ", target " + std::to_string(ex.target_index) + ")");
      ad::backward(loss);
      batch_loss += loss.item();
      batch_terms.mrstft += t.mrstft;
      batch_terms.edc += t.edc;
      batch_terms.spectrum += t.spectrum;
      batch_terms.weight = t.weight;
    }
    acc_norm += opt.step(ps, tc.batch);
    acc += batch_loss / tc.batch;
    acc_terms.mrstft += batch_terms.mrstft / tc.batch;
    acc_terms.edc += batch_terms.edc / tc.batch;
    acc_terms.spectrum += batch_terms.spectrum / tc.batch;
    acc_terms.weight = batch_terms.weight;
    ++acc_n;
    if (step % tc.log_every == 0 || step == tc.steps) {
      TrainLogRow row;
      row.step = step;
      row.loss = acc / acc_n;
      row.terms = {acc_terms.mrstft / acc_n, acc_terms.edc / acc_n, acc_terms.spectrum / acc_n, acc_terms.weight};
      row.grad_norm = acc_norm / acc_n;
      row.seconds = elapsed();
      emit(row);
      acc = acc_norm = 0.0;
      acc_terms = {};
      acc_n = 0;
    }
    if (tc.eval_every > 0 && !val.empty() && (step % tc.eval_every == 0 || step == tc.steps)) {
      ps.set_training(false);
      acoustics::MetricErrors sum;
      std::size_t ok = 0, excluded = 0;
      for (const auto& ex : val) {
        const SceneCache* cache = nullptr;
        for (const auto& c : val_set)
          if (c.scene == ex.scene) cache = &c;
        try {
          const auto e = acoustics::metric_errors(
              acoustics::room_metrics(predict_rir(net, ps, decoder, *cache, ex)),
              acoustics::room_metrics(cache->scene->rirs[ex.target_index]));
          sum.edt += e.edt;
          sum.c50 += e.c50;
          sum.t60 += e.t60;
          ++ok;
        } catch (const Error&) {
          ++excluded;
        }
      }
      TrainLogRow row;
      row.kind = "validation";
      row.step = step;
      row.seconds = elapsed();
      const double n = ok > 0 ? static_cast<double>(ok) : 1.0;
      row.validation = {{"k", tc.k_max},        {"edt_error_s", sum.edt / n}, {"c50_error_db", sum.c50 / n},
                        {"t60_error_pct", sum.t60 / n}, {"count", ok},    {"excluded", excluded}};
      emit(row);
    }
  }
  ps.set_training(false);
  return result;
}

// ---------------------------------------------------------------- checkpoints

inline json model_checkpoint_config(const ModelConfig& mc, std::uint64_t codec_hash, const json& extra = {}) {
  json j = {{"model", mc}, {"codec_hash", nn::hex(codec_hash)}};
  if (!extra.is_null()) j["training"] = extra;
  return j;
}

inline void save_model(const fs::path& dir, const ModelState& m, std::uint64_t codec_hash, const json& extra = {}) {
  nn::save_checkpoint(dir, m.params, kModelNamespace, model_checkpoint_config(m.cfg, codec_hash, extra));
}

struct LoadedModel {
  ModelState model;
  json header;
  std::string codec_hash;
};

inline LoadedModel load_model(const fs::path& dir) {
  json header;
  auto ps = nn::load_checkpoint<float>(dir, &header);
  require(header.value("namespace", "") == kModelNamespace, ErrorKind::MissingArtifact,
          dir.string() + " is not a model checkpoint");
  const auto& cfg = header.at("config");
  auto mc = cfg.at("model").get<ModelConfig>();
  LoadedModel out{ModelState::from_params(mc, ps), header, cfg.at("codec_hash").get<std::string>()};
  out.model.params.set_training(false);
  return out;
}

}  // namespace eigenet::trainer
