#pragma once

#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "eigenet/acoustics/metrics.hpp"
#include "eigenet/acoustics/spectra.hpp"
#include "eigenet/dataset/sampling.hpp"
#include "eigenet/trainer/train.hpp"

namespace eigenet::trainer {

// ---------------------------------------------------------------- baselines

enum class BaselineKind { RandomAcross, RandomSame, Knn, LinearInterp };

NLOHMANN_JSON_SERIALIZE_ENUM(BaselineKind, {{BaselineKind::RandomAcross, "random_across"},
                                            {BaselineKind::RandomSame, "random_same"},
                                            {BaselineKind::Knn, "knn"},
                                            {BaselineKind::LinearInterp, "linear_interp"}})

inline std::string to_string(BaselineKind k) { return json(k).get<std::string>(); }

inline constexpr double kInterpDistanceFloor = 1e-3;

/// Reference RIRs with their source positions.
struct BaselineContext {
  std::vector<const acoustics::Rir*> rirs;
  std::vector<sim::Vec3> positions;
};

inline const acoustics::Rir& pick_uniform(const std::vector<const acoustics::Rir*>& pool, Rng& rng) {
  require(!pool.empty(), ErrorKind::EmptyPool, "baseline pool is empty");
  return *pool[rng.below(pool.size())];
}

inline acoustics::Rir knn_predict(const BaselineContext& ctx, const sim::Vec3& tx0) {
  require(!ctx.rirs.empty() && ctx.rirs.size() == ctx.positions.size(), ErrorKind::EmptyPool,
          "knn needs at least one reference");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ctx.rirs.size(); ++i) {
    const double d = (ctx.positions[i] - tx0).norm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return *ctx.rirs[best];
}

inline acoustics::Rir linear_interp_predict(const BaselineContext& ctx, const sim::Vec3& tx0) {
  require(!ctx.rirs.empty() && ctx.rirs.size() == ctx.positions.size(), ErrorKind::EmptyPool,
          "linear interpolation needs at least one reference");
  std::vector<double> w(ctx.rirs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = 1.0 / std::max((ctx.positions[i] - tx0).norm(), kInterpDistanceFloor);
    total += w[i];
  }
  const auto& first = *ctx.rirs.front();
  std::vector<double> out(first.size(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    require(ctx.rirs[i]->size() == out.size(), ErrorKind::LengthMismatch, "reference RIR lengths differ");
    for (std::size_t t = 0; t < out.size(); ++t) out[t] += w[i] / total * ctx.rirs[i]->samples[t];
  }
  return acoustics::Rir(std::move(out), first.sample_rate);
}

/// `dataset_pool` serves random_across and `scene_pool` random_same; the
/// other kinds use the K references in `ctx`.
inline acoustics::Rir baseline_predict(BaselineKind kind, const BaselineContext& ctx, const sim::Vec3& tx0,
                                       const std::vector<const acoustics::Rir*>& dataset_pool,
                                       const std::vector<const acoustics::Rir*>& scene_pool, Rng& rng) {
  switch (kind) {
    case BaselineKind::RandomAcross: return pick_uniform(dataset_pool, rng);
    case BaselineKind::RandomSame: return pick_uniform(scene_pool, rng);
    case BaselineKind::Knn: return knn_predict(ctx, tx0);
    case BaselineKind::LinearInterp: return linear_interp_predict(ctx, tx0);
  }
  fail(ErrorKind::ConfigInvalid, "unknown baseline");
}

// ---------------------------------------------------------------- octave bands

/// Second-order Butterworth section (bilinear transform with prewarping).
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;

  static Biquad butterworth(double fc, double fs, bool highpass) {
    const double k = std::tan(std::numbers::pi * fc / fs);
    const double q = std::numbers::sqrt2 / 2.0;
    const double norm = 1.0 / (1.0 + k / q + k * k);
    Biquad s;
    if (highpass) {
      s.b0 = norm;
      s.b1 = -2.0 * norm;
    } else {
      s.b0 = k * k * norm;
      s.b1 = 2.0 * s.b0;
    }
    s.b2 = s.b0;
    s.a1 = 2.0 * (k * k - 1.0) * norm;
    s.a2 = (1.0 - k / q + k * k) * norm;
    return s;
  }

  std::vector<double> apply(const std::vector<double>& x) const {
    std::vector<double> y(x.size());
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      y[i] = b0 * x[i] + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
      x2 = x1;
      x1 = x[i];
      y2 = y1;
      y1 = y[i];
    }
    return y;
  }
};

/// 4th-order band-pass over [fc/√2, fc·√2): a 2nd-order Butterworth
/// high-pass at the lower edge cascaded with a 2nd-order low-pass at the upper.
inline acoustics::Rir octave_band_filter(const acoustics::Rir& h, double centre) {
  const double fs = h.sample_rate;
  const double lo = centre / std::numbers::sqrt2;
  const double hi = std::min(centre * std::numbers::sqrt2, 0.49 * fs);
  auto y = Biquad::butterworth(lo, fs, true).apply(h.samples);
  y = Biquad::butterworth(hi, fs, false).apply(y);
  return acoustics::Rir(std::move(y), h.sample_rate);
}

// ---------------------------------------------------------------- accumulation

/// Errors of one prediction, or nothing when a metric is undefined on either side.
inline std::optional<acoustics::MetricErrors> example_errors(const acoustics::Rir& pred, const acoustics::Rir& ref) {
  try {
    const auto e = acoustics::metric_errors(acoustics::room_metrics(pred), acoustics::room_metrics(ref));
    if (std::isfinite(e.edt) && std::isfinite(e.c50) && std::isfinite(e.t60)) return e;
  } catch (const Error&) {
  }
  return std::nullopt;
}

/// Running mean of metric errors with exclusion counting.
struct MetricAccumulator {
  acoustics::MetricErrors sum;
  std::size_t count = 0;
  std::size_t excluded = 0;

  void add(const std::optional<acoustics::MetricErrors>& e) {
    if (!e) {
      ++excluded;
      return;
    }
    sum.edt += e->edt;
    sum.c50 += e->c50;
    sum.t60 += e->t60;
    ++count;
  }
  void add(const acoustics::Rir& pred, const acoustics::Rir& ref) { add(example_errors(pred, ref)); }
  acoustics::MetricErrors mean() const {
    if (count == 0) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      return {nan, nan, nan};
    }
    const double n = static_cast<double>(count);
    return {sum.edt / n, sum.c50 / n, sum.t60 / n};
  }
  double exclusion_rate() const {
    const auto total = count + excluded;
    return total == 0 ? 0.0 : static_cast<double>(excluded) / static_cast<double>(total);
  }
};

/// One (method, K) row of a metrics report.
struct MetricRow {
  std::string method;
  int k = 0;
  acoustics::MetricErrors mean;
  std::size_t count = 0;
  std::size_t excluded = 0;
  double exclusion_rate = 0.0;
  /// Per-octave-band means (7 entries) when the breakdown was requested.
  std::vector<acoustics::MetricErrors> bands;
};

inline MetricRow to_row(const std::string& method, int k, const MetricAccumulator& acc) {
  return {method, k, acc.mean(), acc.count, acc.excluded, acc.exclusion_rate(), {}};
}

inline void to_json(json& j, const MetricRow& r) {
  j = {{"method", r.method},           {"k", r.k},
       {"edt_error_s", r.mean.edt},     {"c50_error_db", r.mean.c50},
       {"t60_error_pct", r.mean.t60},   {"count", r.count},
       {"excluded", r.excluded},        {"exclusion_rate", r.exclusion_rate}};
  if (!r.bands.empty()) j["bands"] = r.bands;
}

struct MetricsReport {
  std::vector<MetricRow> rows;
  json metadata = json::object();

  const MetricRow* find(const std::string& method, int k) const {
    for (const auto& r : rows)
      if (r.method == method && r.k == k) return &r;
    return nullptr;
  }
};

inline void to_json(json& j, const MetricsReport& r) { j = {{"metadata", r.metadata}, {"rows", r.rows}}; }

// ---------------------------------------------------------------- evaluation

struct EvalConfig {
  std::vector<int> ks{1, 4, 8};
  /// Reference-sampling seeds; results are averaged over all of them.
  std::vector<std::uint64_t> seeds{0, 1, 2};
  /// Targets per scene (all sources when ≤ 0).
  int targets_per_scene = 0;
  bool octave_breakdown = false;
  /// Worker threads over examples; results do not depend on it.
  int threads = 1;
};

inline void to_json(json& j, const EvalConfig& c) {
  j = {{"ks", c.ks}, {"seeds", c.seeds}, {"targets_per_scene", c.targets_per_scene},
       {"octave_breakdown", c.octave_breakdown}};
}
inline void from_json(const json& j, EvalConfig& c) {
  const EvalConfig d;
  c.ks = j.value("ks", d.ks);
  c.seeds = j.value("seeds", d.seeds);
  c.targets_per_scene = j.value("targets_per_scene", d.targets_per_scene);
  c.octave_breakdown = j.value("octave_breakdown", d.octave_breakdown);
}

/// A method maps an evaluation example to a predicted RIR. `rng` is private
/// to the (method, seed, example) triple.
using Predictor = std::function<acoustics::Rir(const SceneCache&, const data::Example&, Rng&)>;

struct Method {
  std::string name;
  Predictor predict;
};

/// The fixed evaluation examples for one (K, seed): every selected target of
/// every scene, with K references sampled independently of the method.
inline std::vector<std::pair<std::size_t, data::Example>> evaluation_examples(const std::vector<SceneCache>& caches,
                                                                              int k, std::uint64_t seed,
                                                                              int targets_per_scene) {
  std::vector<std::pair<std::size_t, data::Example>> out;
  for (std::size_t c = 0; c < caches.size(); ++c) {
    const auto& scene = *caches[c].scene;
    const std::size_t m = scene.sources.size();
    const std::size_t targets =
        targets_per_scene > 0 ? std::min(m, static_cast<std::size_t>(targets_per_scene)) : m;
    Rng rng = Rng(seed).split("eval-refs").split(scene.scene_id).split(static_cast<std::uint64_t>(k));
    for (std::size_t t = 0; t < targets; ++t)
      out.emplace_back(c, data::sample_references(scene, t, static_cast<std::size_t>(k), rng));
  }
  return out;
}

namespace detail {

inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

/// Evaluates each method over the test caches for every K and seed.
inline MetricsReport evaluate(const std::vector<Method>& methods, const std::vector<SceneCache>& caches,
                              const EvalConfig& cfg) {
  require(!caches.empty(), ErrorKind::EmptyInput, "evaluation needs at least one scene");
  MetricsReport report;
  report.metadata = {{"eval", cfg},
                     {"scenes", caches.size()},
                     {"seed_semantics", "seeds vary evaluation reference sampling only"}};
  const auto centres = acoustics::OctaveBank{}.center_frequencies;
  for (const auto& method : methods) {
    for (int k : cfg.ks) {
      MetricAccumulator acc;
      std::vector<MetricAccumulator> bands(cfg.octave_breakdown ? centres.size() : 0);
      for (auto seed : cfg.seeds) {
        const auto examples = evaluation_examples(caches, k, seed, cfg.targets_per_scene);
        // Per-example outcomes are computed in parallel, then accumulated in order.
        std::vector<std::vector<std::optional<acoustics::MetricErrors>>> outcomes(examples.size());
        detail::parallel_for(examples.size(), cfg.threads, [&](std::size_t i) {
          const auto& [c, ex] = examples[i];
          Rng rng = Rng(seed).split("method").split(method.name).split(caches[c].scene->scene_id).split(
              static_cast<std::uint64_t>(ex.target_index));
          const auto pred = method.predict(caches[c], ex, rng);
          const auto& ref = caches[c].scene->rirs[ex.target_index];
          auto& out = outcomes[i];
          out.push_back(example_errors(pred, ref));
          for (std::size_t b = 0; b < bands.size(); ++b)
            out.push_back(example_errors(octave_band_filter(pred, centres[b]), octave_band_filter(ref, centres[b])));
        });
        for (const auto& out : outcomes) {
          acc.add(out[0]);
          for (std::size_t b = 0; b < bands.size(); ++b) bands[b].add(out[b + 1]);
        }
      }
      auto row = to_row(method.name, k, acc);
      for (const auto& b : bands) row.bands.push_back(b.mean());
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

inline Method model_method(const std::string& name, const ModelState& m, const codec::FrozenCodec& codec,
                           const std::optional<ProbeSpec>& probe = std::nullopt) {
  return {name, [&m, &codec, probe](const SceneCache& c, const data::Example& ex, Rng&) {
            const model::DecoderRef<float> dec{&codec.arch(), &codec.params()};
            return predict_rir(m.net, m.params, dec, c, ex, probe);
          }};
}

/// Ground truth as a predictor; every error is zero.
inline Method oracle_method() {
  return {"ground_truth",
          [](const SceneCache& c, const data::Example& ex, Rng&) { return c.scene->rirs[ex.target_index]; }};
}

inline Method baseline_method(BaselineKind kind, const std::vector<SceneCache>& caches) {
  std::vector<const acoustics::Rir*> dataset_pool;
  for (const auto& c : caches)
    for (const auto& h : c.scene->rirs) dataset_pool.push_back(&h);
  return {to_string(kind), [kind, dataset_pool](const SceneCache& c, const data::Example& ex, Rng& rng) {
            const auto& scene = *c.scene;
            BaselineContext ctx;
            for (auto i : ex.reference_indices) {
              ctx.rirs.push_back(&scene.rirs[i]);
              ctx.positions.push_back(scene.sources[i]);
            }
            std::vector<const acoustics::Rir*> scene_pool;
            for (std::size_t i = 0; i < scene.rirs.size(); ++i)
              if (i != ex.target_index) scene_pool.push_back(&scene.rirs[i]);
            return baseline_predict(kind, ctx, scene.sources[ex.target_index], dataset_pool, scene_pool, rng);
          }};
}

inline std::vector<Method> all_baselines(const std::vector<SceneCache>& caches) {
  return {baseline_method(BaselineKind::RandomAcross, caches), baseline_method(BaselineKind::RandomSame, caches),
          baseline_method(BaselineKind::Knn, caches), baseline_method(BaselineKind::LinearInterp, caches)};
}

// ---------------------------------------------------------------- probes

struct ProbeRow {
  std::string mode;  // "full", "geo" or "ac"
  int keep = 0;
  acoustics::MetricErrors mean;
  std::size_t count = 0;
  std::size_t excluded = 0;
};

inline void to_json(json& j, const ProbeRow& r) {
  j = {{"mode", r.mode},
       {"keep", r.keep},
       {"edt_error_s", r.mean.edt},
       {"c50_error_db", r.mean.c50},
       {"t60_error_pct", r.mean.t60},
       {"count", r.count},
       {"excluded", r.excluded}};
}

/// Masked evaluation with N references: one unmasked row, then one row per
/// (mode, keep) pair.
inline std::vector<ProbeRow> run_probe(const ModelState& m, const codec::FrozenCodec& codec,
                                       const std::vector<SceneCache>& caches, int n_refs,
                                       const std::vector<ProbeSpec::Mode>& modes, const std::vector<int>& keeps,
                                       const EvalConfig& base = {}) {
  EvalConfig cfg = base;
  cfg.ks = {n_refs};
  cfg.octave_breakdown = false;
  std::vector<ProbeRow> rows;
  auto run = [&](const std::string& mode, int keep, const std::optional<ProbeSpec>& probe) {
    const auto r = evaluate({model_method("probe", m, codec, probe)}, caches, cfg).rows.front();
    rows.push_back({mode, keep, r.mean, r.count, r.excluded});
  };
  run("full", n_refs, std::nullopt);
  for (auto mode : modes)
    for (int keep : keeps) {
      require(keep >= 0 && keep <= n_refs, ErrorKind::ConfigInvalid, "probe keep count exceeds references");
      run(model::to_string(mode), keep, ProbeSpec{mode, keep});
    }
  return rows;
}

}  // namespace eigenet::trainer
