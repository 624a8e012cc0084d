#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "eigenet/simulator/scene_sampler.hpp"
#include "eigenet/trainer/ablation.hpp"
#include "eigenet/trainer/evaluate.hpp"
#include "eigenet/trainer/report.hpp"
#include "eigenet/trainer/train.hpp"
#include "support.hpp"

using namespace eigenet;
using namespace eigenet::trainer;
using M = ad::Mat<double>;
namespace fs = std::filesystem;

namespace {

template <typename F>
void expect_error(ErrorKind kind, F&& f) {
  try {
    f();
    ADD_FAILURE() << "expected " << to_string(kind);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

model::ModelConfig tiny_model() {
  model::ModelConfig c;
  c.f = 16;
  c.heads = 2;
  c.blocks = 1;
  c.depth_height = 8;
  c.depth_width = 16;
  c.patch_h = 4;
  c.patch_w = 8;
  c.vit_dim = 8;
  c.vit_layers = 1;
  c.vit_heads = 2;
  c.coord_freqs = 2;
  c.coord_hidden = 8;
  c.coord_dim = 8;
  c.proxy_pe_dim = 8;
  c.codec_latent_dim = 4;
  return c;
}

const codec::FrozenCodec& tiny_codec() {
  static const codec::FrozenCodec c = [] {
    codec::CodecConfig cfg;
    cfg.latent_dim = 4;
    cfg.channels = {2, 2, 2};
    return codec::FrozenCodec::initialized(cfg, 5);
  }();
  return c;
}

const std::vector<data::Scene>& scenes() {
  static const std::vector<data::Scene> s = [] {
    sim::SceneSamplerConfig cfg;
    cfg.max_order = 4;
    cfg.num_sources = 10;
    cfg.depth_height = 8;
    cfg.depth_width = 16;
    std::vector<data::Scene> out;
    for (std::uint64_t seed = 0; seed < 4; ++seed) out.push_back(sim::sample_scene(seed, cfg));
    return out;
  }();
  return s;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("eigenet_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

TrainConfig short_training(int steps) {
  TrainConfig tc;
  tc.steps = steps;
  tc.batch = 2;
  tc.log_every = 1;
  tc.seed = 9;
  return tc;
}

}  // namespace

// ---------------------------------------------------------------- loss

TEST(Loss, WarmupSchedule) {
  EXPECT_EQ(warmup_weight(0, 200), 0.0);
  EXPECT_EQ(warmup_weight(100, 200), 0.5);
  EXPECT_EQ(warmup_weight(200, 200), 1.0);
  EXPECT_EQ(warmup_weight(5000, 200), 1.0);
  EXPECT_EQ(warmup_weight(0, 0), 1.0);
}

TEST(Loss, TotalCombinesTermsWithWarmup) {
  const auto h = eigenet::testing::random_rir(1), g = eigenet::testing::random_rir(2);
  const auto hv = acoustics::as_row(h), gv = acoustics::as_row(g);
  const auto s = ad::constant<double>(acoustics::octave_power_spectrum(h));
  const auto t = ad::constant<double>(acoustics::octave_power_spectrum(g));
  const LossConfig cfg;
  const double mr = acoustics::mrstft_loss(h, g), edc = acoustics::edc_loss(h, g);
  const double sp = acoustics::spectrum_loss(s.value(), t.value());
  LossTerms terms;
  EXPECT_NEAR(total_loss<double>(hv, gv, s, t, 0, cfg, &terms).item(), mr, 1e-12);
  EXPECT_EQ(terms.weight, 0.0);
  EXPECT_NEAR(total_loss<double>(hv, gv, s, t, 100, cfg).item(), mr + 0.5 * (edc + 0.01 * sp), 1e-9);
  EXPECT_NEAR(total_loss<double>(hv, gv, s, t, 400, cfg, &terms).item(), mr + edc + 0.01 * sp, 1e-9);
  EXPECT_NEAR(terms.mrstft, mr, 1e-12);
  EXPECT_NEAR(terms.edc, edc, 1e-12);
  EXPECT_NEAR(terms.spectrum, sp, 1e-12);
  EXPECT_NEAR(total_loss<double>(hv, gv, {}, {}, 400, cfg).item(), mr + edc, 1e-9);
}

TEST(Loss, MissingSpectrumTarget) {
  const auto hv = acoustics::as_row(eigenet::testing::random_rir(1));
  const auto s = ad::constant<double>(M::Zero(25, 7));
  expect_error(ErrorKind::MissingSpectrumTarget, [&] { total_loss<double>(hv, hv, s, {}, 0, LossConfig{}); });

  // A cache built without spectra cannot train a model that predicts one.
  const std::vector<data::Scene> one{scenes()[0]};
  const auto caches = build_caches(one, tiny_codec(), model::SpectrumTarget::None);
  const auto m = ModelState::create(tiny_model(), 1);
  Rng rng(3);
  const auto ex = data::sample_example(*caches[0].scene, 2, rng);
  expect_error(ErrorKind::MissingSpectrumTarget, [&] {
    example_loss<float>(m.net, m.params, {&tiny_codec().arch(), &tiny_codec().params()}, caches[0], ex, 0,
                        LossConfig{});
  });
}

// ---------------------------------------------------------------- baselines

TEST(Baselines, KnnAndInterpolationByHand) {
  const acoustics::Rir a(std::vector<double>{1, 0, 0, 0}, 16000), b(std::vector<double>{0, 0, 2, 0}, 16000);
  BaselineContext ctx{{&a, &b}, {sim::Vec3(1, 0, 0), sim::Vec3(0, 3, 0)}};
  EXPECT_EQ(knn_predict(ctx, sim::Vec3(0.2, 0.1, 0)).samples, a.samples);
  EXPECT_EQ(knn_predict(ctx, sim::Vec3(0, 2.5, 0)).samples, b.samples);
  // Distances 1 and 3 from the origin: weights 3/4 and 1/4.
  const auto mix = linear_interp_predict(ctx, sim::Vec3::Zero());
  EXPECT_NEAR(mix.samples[0], 0.75, 1e-15);
  EXPECT_NEAR(mix.samples[2], 0.5, 1e-15);
  // A reference at the target position dominates through the distance floor.
  const auto at = linear_interp_predict(ctx, sim::Vec3(1, 0, 0));
  EXPECT_NEAR(at.samples[0], 1.0, 1e-3);
  BaselineContext swapped{{&b, &a}, {sim::Vec3(0, 3, 0), sim::Vec3(1, 0, 0)}};
  const auto mix2 = linear_interp_predict(swapped, sim::Vec3::Zero());
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(mix2.samples[i], mix.samples[i], 1e-15);
}

TEST(Baselines, RandomSameExcludesTarget) {
  const auto caches = build_caches(scenes(), tiny_codec(), model::SpectrumTarget::None);
  const auto method = baseline_method(BaselineKind::RandomSame, caches);
  const auto& scene = *caches[0].scene;
  Rng rng(4);
  for (int i = 0; i < 300; ++i) {
    const auto ex = data::sample_example(scene, 3, rng);
    const auto pred = method.predict(caches[0], ex, rng);
    EXPECT_NE(pred.samples, scene.rirs[ex.target_index].samples);
    bool from_scene = false;
    for (const auto& h : scene.rirs) from_scene = from_scene || h.samples == pred.samples;
    EXPECT_TRUE(from_scene);
  }
}

TEST(Baselines, EmptyPool) {
  Rng rng(1);
  expect_error(ErrorKind::EmptyPool, [&] { knn_predict({}, sim::Vec3::Zero()); });
  expect_error(ErrorKind::EmptyPool, [&] { linear_interp_predict({}, sim::Vec3::Zero()); });
  expect_error(ErrorKind::EmptyPool, [&] { pick_uniform({}, rng); });
}

// ---------------------------------------------------------------- evaluation

TEST(Evaluation, OracleHasZeroError) {
  const auto caches = build_caches(scenes(), tiny_codec(), model::SpectrumTarget::None);
  EvalConfig ec;
  ec.ks = {1, 8};
  ec.seeds = {0, 1};
  ec.octave_breakdown = true;
  const auto r = evaluate({oracle_method()}, caches, ec);
  ASSERT_EQ(r.rows.size(), 2u);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.count + row.excluded, 4u * 10u * 2u);
    EXPECT_EQ(row.mean.edt, 0.0);
    EXPECT_EQ(row.mean.c50, 0.0);
    EXPECT_EQ(row.mean.t60, 0.0);
    ASSERT_EQ(row.bands.size(), 7u);
  }
}

TEST(Evaluation, DeterministicAndThreadInvariant) {
  const auto caches = build_caches(scenes(), tiny_codec(), model::SpectrumTarget::None);
  EvalConfig ec;
  ec.targets_per_scene = 4;
  const auto a = evaluate(all_baselines(caches), caches, ec);
  ec.threads = 3;
  const auto b = evaluate(all_baselines(caches), caches, ec);
  ASSERT_EQ(a.rows.size(), 12u);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].method, b.rows[i].method);
    EXPECT_EQ(a.rows[i].mean.edt, b.rows[i].mean.edt);
    EXPECT_EQ(a.rows[i].mean.c50, b.rows[i].mean.c50);
    EXPECT_EQ(a.rows[i].mean.t60, b.rows[i].mean.t60);
  }
  // With one reference, knn and linear interpolation coincide.
  EXPECT_EQ(a.rows[6].mean.c50, a.rows[9].mean.c50);
  EXPECT_EQ(a.rows[6].k, 1);
}

TEST(Evaluation, EvaluationExamplesIgnoreMethod) {
  const auto caches = build_caches(scenes(), tiny_codec(), model::SpectrumTarget::None);
  const auto a = evaluation_examples(caches, 4, 1, 0);
  const auto b = evaluation_examples(caches, 4, 1, 0);
  ASSERT_EQ(a.size(), 40u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].second.reference_indices, b[i].second.reference_indices);
  expect_error(ErrorKind::EmptyInput, [] { evaluate({oracle_method()}, {}, {}); });
}

// ---------------------------------------------------------------- training

TEST(Training, CodecStaysFrozenAndRunIsDeterministic) {
  const auto caches = build_caches(scenes(), tiny_codec(), model::SpectrumTarget::Octave7);
  const auto before = tiny_codec().hash();
  const auto a = train(tiny_model(), caches, tiny_codec(), short_training(3));
  EXPECT_EQ(tiny_codec().hash(), before);
  const auto b = train(tiny_model(), caches, tiny_codec(), short_training(3));
  ASSERT_EQ(a.log.size(), 3u);
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_TRUE(std::isfinite(a.log[i].loss));
    EXPECT_EQ(a.log[i].loss, b.log[i].loss);
  }
  EXPECT_EQ(a.model.params.hash(), b.model.params.hash());
  EXPECT_NE(a.model.params.hash(), ModelState::create(tiny_model(), 9).params.hash());
  EXPECT_EQ(a.log[0].terms.weight, 0.0);
}

TEST(Training, SmokeLossTrendsDown) {
  const auto caches = build_caches(scenes(), tiny_codec(), model::SpectrumTarget::Octave7);
  auto tc = short_training(60);
  tc.loss.warmup_steps = 0;
  tc.adam.lr = 3e-3;
  const auto r = train(tiny_model(), caches, tiny_codec(), tc);
  ASSERT_EQ(r.log.size(), 60u);
  double head = 0, tail = 0;
  for (int i = 0; i < 15; ++i) {
    head += r.log[static_cast<std::size_t>(i)].loss;
    tail += r.log[r.log.size() - 1 - static_cast<std::size_t>(i)].loss;
  }
  EXPECT_LT(tail, head);
}

TEST(Training, ValidationRowsAndLatentWidthCheck) {
  const auto caches = build_caches(scenes(), tiny_codec(), model::SpectrumTarget::Octave7);
  auto tc = short_training(2);
  tc.log_every = 2;
  tc.eval_every = 2;
  tc.val_examples = 2;
  std::vector<std::string> kinds;
  const auto r = train(tiny_model(), caches, tiny_codec(), tc, caches, [&](const TrainLogRow& row) {
    kinds.push_back(row.kind);
  });
  EXPECT_EQ(kinds, (std::vector<std::string>{"train", "validation"}));
  EXPECT_EQ(r.log[1].validation.at("count").get<int>() + r.log[1].validation.at("excluded").get<int>(), 2);

  auto wide = tiny_model();
  wide.codec_latent_dim = 8;
  expect_error(ErrorKind::ShapeMismatch, [&] { train(wide, caches, tiny_codec(), tc); });
  expect_error(ErrorKind::EmptyInput, [&] { train(tiny_model(), {}, tiny_codec(), tc); });
}

TEST(Training, CheckpointRoundTrip) {
  TempDir dir("model_ckpt");
  const auto m = ModelState::create(tiny_model(), 4);
  save_model(dir.path, m, tiny_codec().hash());
  const auto loaded = load_model(dir.path);
  EXPECT_EQ(loaded.model.params.hash(), m.params.hash());
  EXPECT_EQ(loaded.codec_hash, nn::hex(tiny_codec().hash()));
  EXPECT_EQ(loaded.model.cfg.f, 16);
}

// ---------------------------------------------------------------- reports

TEST(Reports, MetricsCsvRoundTrip) {
  TempDir dir("csv");
  MetricsReport r;
  r.rows.push_back({"knn", 1, {0.0123456789, 1.5, 3.25}, 10, 2, 2.0 / 12.0, {}});
  r.rows.push_back({"eigenet", 8, {1e-5, 0.25, 100.0}, 12, 0, 0.0, {}});
  write_metrics_csv(dir.path / "m.csv", r);
  const auto back = read_metrics_csv(dir.path / "m.csv");
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].method, r.rows[i].method);
    EXPECT_EQ(back[i].k, r.rows[i].k);
    EXPECT_NEAR(back[i].mean.edt, r.rows[i].mean.edt, 1e-9 * std::abs(r.rows[i].mean.edt));
    EXPECT_NEAR(back[i].mean.c50, r.rows[i].mean.c50, 1e-9);
    EXPECT_NEAR(back[i].mean.t60, r.rows[i].mean.t60, 1e-7);
    EXPECT_EQ(back[i].count, r.rows[i].count);
    EXPECT_EQ(back[i].excluded, r.rows[i].excluded);
  }
  const auto svgs = render_k_scaling(dir.path / "m.csv", dir.path);
  EXPECT_EQ(svgs.size(), 3u);
  for (const auto& p : svgs) EXPECT_GT(fs::file_size(p), 100u);
}

TEST(Reports, ModulationWinsFromCsv) {
  TempDir dir("wins");
  std::ofstream(dir.path / "a.csv") << "attention,modulation,spectrum,geometry,k,c50_error_db\n"
                                       "aa,on,octave,full,1,1.0\naa,off,octave,full,1,2.0\n"
                                       "sa,on,octave,full,1,3.0\nsa,off,octave,full,1,2.0\n"
                                       "ca,on,octave,full,1,1.0\nca,off,octave,full,1,1.5\n"
                                       "aa,on,none,full,1,9.0\n";
  EXPECT_EQ(modulation_c50_wins(read_csv(dir.path / "a.csv")), 2);
}

// ---------------------------------------------------------------- ablation and probes

TEST(Ablation, EightCellsWithSharedCenter) {
  const auto cells = ablation_cells(model::ModelConfig{});
  ASSERT_EQ(cells.size(), 8u);
  std::set<std::string> names;
  for (const auto& c : cells) names.insert(c.name);
  EXPECT_EQ(names.size(), 8u);
  int shared = 0;
  for (const auto& c : cells)
    if (c.tables.size() == 2) {
      ++shared;
      EXPECT_EQ(c.name, "aa_mod_octave_full");
    }
  EXPECT_EQ(shared, 1);
  EXPECT_EQ(ablation_cells(model::ModelConfig{}, true).size(), 10u);
}

TEST(Probe, RowStructure) {
  const std::vector<data::Scene> one{scenes()[0]};
  const auto caches = build_caches(one, tiny_codec(), model::SpectrumTarget::Octave7);
  const auto m = ModelState::create(tiny_model(), 2);
  EvalConfig ec;
  ec.seeds = {0};
  ec.targets_per_scene = 2;
  const auto rows = run_probe(m, tiny_codec(), caches, 8, {model::ProbeSpec::Mode::MaskGeo, model::ProbeSpec::Mode::MaskAc},
                              {0, 1, 4}, ec);
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows[0].mode, "full");
  EXPECT_EQ(rows[0].keep, 8);
  EXPECT_EQ(rows[1].mode, "geo");
  EXPECT_EQ(rows[4].mode, "ac");
  EXPECT_EQ(rows[6].keep, 4);
  for (const auto& r : rows) EXPECT_EQ(r.count + r.excluded, 2u);
  expect_error(ErrorKind::ConfigInvalid,
               [&] { run_probe(m, tiny_codec(), caches, 8, {model::ProbeSpec::Mode::MaskGeo}, {9}, ec); });
}
