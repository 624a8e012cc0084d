#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <vector>

#include "json.hpp"

#include "eigenet/acoustics/losses.hpp"
#include "eigenet/acoustics/metrics.hpp"
#include "eigenet/codec/codec.hpp"
#include "eigenet/nn/adam.hpp"
#include "eigenet/nn/checkpoint.hpp"

namespace eigenet::codec {

/// Round-trip thresholds on mean EDT (s), C50 (dB) and T60 (%) error.
struct QualityGate {
  double edt = 0.02;
  double c50 = 2.0;
  double t60 = 15.0;
};

struct CodecTrainConfig {
  int max_steps = 4000;
  /// The gate may stop training early, but never before this many steps.
  int min_steps = 1000;
  int batch = 8;
  nn::AdamConfig adam{1e-3, 0.9, 0.999, 1e-8, 1.0};
  double lambda_edc = 1.0;
  int eval_every = 500;
  int log_every = 50;
  std::uint64_t seed = 0;
  QualityGate gate;
};

inline void to_json(nlohmann::json& j, const QualityGate& g) {
  j = {{"edt", g.edt}, {"c50", g.c50}, {"t60", g.t60}};
}
inline void from_json(const nlohmann::json& j, QualityGate& g) {
  const QualityGate d;
  g.edt = j.value("edt", d.edt);
  g.c50 = j.value("c50", d.c50);
  g.t60 = j.value("t60", d.t60);
}
inline void to_json(nlohmann::json& j, const CodecTrainConfig& c) {
  j = {{"max_steps", c.max_steps}, {"min_steps", c.min_steps}, {"batch", c.batch},         {"adam", c.adam},
       {"lambda_edc", c.lambda_edc}, {"eval_every", c.eval_every}, {"log_every", c.log_every},
       {"seed", c.seed},           {"gate", c.gate}};
}
inline void from_json(const nlohmann::json& j, CodecTrainConfig& c) {
  const CodecTrainConfig d;
  c.max_steps = j.value("max_steps", d.max_steps);
  c.min_steps = j.value("min_steps", d.min_steps);
  c.batch = j.value("batch", d.batch);
  c.adam = j.value("adam", d.adam);
  c.lambda_edc = j.value("lambda_edc", d.lambda_edc);
  c.eval_every = j.value("eval_every", d.eval_every);
  c.log_every = j.value("log_every", d.log_every);
  c.seed = j.value("seed", d.seed);
  c.gate = j.value("gate", d.gate);
}

struct GateReport {
  acoustics::MetricErrors mean;
  std::size_t evaluated = 0;
  std::size_t excluded = 0;
  bool passed = false;
};

inline void to_json(nlohmann::json& j, const GateReport& r) {
  j = {{"edt_error_s", r.mean.edt}, {"c50_error_db", r.mean.c50}, {"t60_error_pct", r.mean.t60},
       {"evaluated", r.evaluated},  {"excluded", r.excluded},     {"passed", r.passed}};
}

/// Mean metric errors of decode(encode(h)) against h. RIRs whose metrics
/// are undefined (on either side) are excluded and counted.
inline GateReport evaluate_codec(const FrozenCodec& codec, const std::vector<const acoustics::Rir*>& rirs,
                                 const QualityGate& gate = {}) {
  GateReport r;
  for (const auto* h : rirs) {
    try {
      const auto ref = acoustics::room_metrics(*h);
      const auto pred = acoustics::room_metrics(codec.decode(codec.encode(*h)));
      const auto e = acoustics::metric_errors(pred, ref);
      r.mean.edt += e.edt;
      r.mean.c50 += e.c50;
      r.mean.t60 += e.t60;
      ++r.evaluated;
    } catch (const Error&) {
      ++r.excluded;
    }
  }
  if (r.evaluated > 0) {
    const double n = static_cast<double>(r.evaluated);
    r.mean = {r.mean.edt / n, r.mean.c50 / n, r.mean.t60 / n};
  }
  r.passed = r.evaluated > 0 && r.mean.edt <= gate.edt && r.mean.c50 <= gate.c50 && r.mean.t60 <= gate.t60;
  return r;
}

inline void require_gate(const GateReport& g, const QualityGate& gate) {
  require(g.passed, ErrorKind::QualityGateNotMet,
          "codec quality gate not met: edt " + std::to_string(g.mean.edt) + " s (<= " + std::to_string(gate.edt) +
              "), c50 " + std::to_string(g.mean.c50) + " dB (<= " + std::to_string(gate.c50) + "), t60 " +
              std::to_string(g.mean.t60) + " % (<= " + std::to_string(gate.t60) + ")");
}

/// Worst ratio of a metric error to its threshold; the gate passes iff this is ≤ 1.
inline double gate_score(const GateReport& g, const QualityGate& gate) {
  return std::max({g.mean.edt / gate.edt, g.mean.c50 / gate.c50, g.mean.t60 / gate.t60});
}

/// Reconstruction objective mrstft + λ·edc for one waveform.
template <typename T>
Var<T> reconstruction_loss(const Codec& arch, const ParamStore<T>& ps, const Mat<T>& h, double lambda_edc) {
  auto x = ad::constant<T>(h);
  auto y = arch.decode(ps, arch.encode(ps, x));
  auto loss = acoustics::mrstft_loss<T>(y, x);
  if (lambda_edc > 0.0) loss = ad::add(loss, ad::scale(acoustics::edc_loss<T>(y, x), static_cast<T>(lambda_edc)));
  return loss;
}

struct PretrainLogRow {
  int step = 0;
  double loss = 0.0;
};

struct PretrainResult {
  FrozenCodec codec;
  std::vector<PretrainLogRow> log;
  std::vector<std::pair<int, GateReport>> evaluations;
  GateReport gate;
  int steps = 0;
};

/// Trains a fresh codec until the quality gate passes on `val` (checked every
/// eval_every steps, no earlier than min_steps) or max_steps is reached. Deterministic given the seed.
inline PretrainResult pretrain_codec(const std::vector<const acoustics::Rir*>& train,
                                     const std::vector<const acoustics::Rir*>& val, const CodecConfig& cfg,
                                     const CodecTrainConfig& tc,
                                     const std::function<void(const std::string&)>& progress = {}) {
  require(!train.empty() && !val.empty(), ErrorKind::EmptyInput, "codec pretraining needs train and val RIRs");
  ParamStore<float> ps;
  Codec arch(Scope<float>(ps, Rng(tc.seed).split("codec-init"), kCodecNamespace), cfg);
  for (const auto* h : train)
    require(static_cast<int>(h->size()) % cfg.hop() == 0, ErrorKind::LengthNotDivisible,
            "training RIR length not divisible by codec hop");

  std::vector<Mat<float>> rows;
  rows.reserve(train.size());
  for (const auto* h : train) rows.push_back(acoustics::as_row(*h).value().cast<float>());

  nn::Adam<float> opt(tc.adam);
  Rng rng = Rng(tc.seed).split("codec-batches");
  PretrainResult result;
  std::optional<std::pair<FrozenCodec, GateReport>> best;
  double running = 0.0;
  int running_n = 0;
  for (int step = 1; step <= tc.max_steps; ++step) {
    ps.set_training(true);
    double batch_loss = 0.0;
    for (int b = 0; b < tc.batch; ++b) {
      const auto& h = rows[rng.below(rows.size())];
      auto loss = reconstruction_loss<float>(arch, ps, h, tc.lambda_edc);
      require(std::isfinite(loss.item()), ErrorKind::NonFiniteLoss,
              "codec loss is not finite at step " + std::to_string(step));
      batch_loss += loss.item();
      ad::backward(loss);
    }
    opt.step(ps, tc.batch);
    running += batch_loss / tc.batch;
    ++running_n;
    if (step % tc.log_every == 0 || step == tc.max_steps) {
      result.log.push_back({step, running / running_n});
      if (progress) progress("codec step " + std::to_string(step) + " loss " + std::to_string(running / running_n));
      running = 0.0;
      running_n = 0;
    }
    result.steps = step;
    if (step % tc.eval_every == 0 || step == tc.max_steps) {
      FrozenCodec snapshot(cfg, ps.cast<float>());
      auto g = evaluate_codec(snapshot, val, tc.gate);
      result.evaluations.emplace_back(step, g);
      if (progress)
        progress("codec gate @" + std::to_string(step) + ": edt " + std::to_string(g.mean.edt) + " c50 " +
                 std::to_string(g.mean.c50) + " t60 " + std::to_string(g.mean.t60) + (g.passed ? " PASS" : ""));
      result.gate = g;
      if (g.evaluated > 0 && (!best || gate_score(g, tc.gate) < gate_score(best->second, tc.gate)))
        best.emplace(std::move(snapshot), g);
      if (g.passed && step >= tc.min_steps) break;
    }
  }
  ps.set_training(false);
  result.codec = FrozenCodec(cfg, std::move(ps));
  // Gate metrics fluctuate between evaluations; fall back to the best one seen.
  if (!result.gate.passed && best && gate_score(best->second, tc.gate) < gate_score(result.gate, tc.gate)) {
    result.codec = std::move(best->first);
    result.gate = best->second;
    if (progress) progress("codec: restored best gate snapshot");
  }
  return result;
}

// ---------------------------------------------------------------- checkpoints

inline void save_codec(const std::filesystem::path& dir, const FrozenCodec& codec, const nlohmann::json& extra = {}) {
  nlohmann::json cfg = {{"codec", codec.arch().config()}};
  if (!extra.is_null()) cfg["training"] = extra;
  nn::save_checkpoint(dir, codec.params(), kCodecNamespace, cfg);
}

struct LoadedCodec {
  FrozenCodec codec;
  nlohmann::json header;
};

inline LoadedCodec load_codec(const std::filesystem::path& dir) {
  nlohmann::json header;
  auto ps = nn::load_checkpoint<float>(dir, &header);
  require(header.value("namespace", "") == kCodecNamespace, ErrorKind::MissingArtifact,
          dir.string() + " is not a codec checkpoint");
  return {FrozenCodec(header.at("config").at("codec").get<CodecConfig>(), std::move(ps)), header};
}

}  // namespace eigenet::codec
