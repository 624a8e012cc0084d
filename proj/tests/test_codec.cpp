#include <gtest/gtest.h>

#include <filesystem>

#include "eigenet/acoustics/spectra.hpp"
#include "eigenet/codec/codec.hpp"
#include "eigenet/codec/pretrain.hpp"
#include "eigenet/nn/gradcheck.hpp"
#include "eigenet/simulator/scene_sampler.hpp"
#include "support.hpp"

using namespace eigenet;
using namespace eigenet::codec;
using M = ad::Mat<double>;

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

/// Two-stage codec with hop 4 for gradient checks.
CodecConfig tiny_config() {
  CodecConfig c;
  c.sample_rate = 200;
  c.frame_rate = 50;
  c.latent_dim = 3;
  c.strides = {2, 2};
  c.channels = {4};
  return c;
}

std::vector<acoustics::Rir> corpus_rirs(int scenes) {
  sim::SceneSamplerConfig cfg;
  cfg.max_order = 8;
  std::vector<acoustics::Rir> out;
  for (int s = 0; s < scenes; ++s)
    for (auto& h : sim::sample_scene(500 + static_cast<std::uint64_t>(s), cfg).rirs) out.push_back(std::move(h));
  return out;
}

std::vector<const acoustics::Rir*> pointers(const std::vector<acoustics::Rir>& v, std::size_t begin, std::size_t end) {
  std::vector<const acoustics::Rir*> out;
  for (std::size_t i = begin; i < end; ++i) out.push_back(&v[i]);
  return out;
}

}  // namespace

TEST(CodecShapes, DefaultTokenGrid) {
  const auto c = FrozenCodec::initialized({}, 1);
  const auto z = c.encode(eigenet::testing::random_rir(3));
  EXPECT_EQ(z.rows(), 25);
  EXPECT_EQ(z.cols(), 128);
  const auto h = c.decode(z);
  EXPECT_EQ(h.size(), 8000u);
  EXPECT_EQ(h.sample_rate, 16000);
}

TEST(CodecShapes, Errors) {
  const auto c = FrozenCodec::initialized({}, 1);
  expect_error(ErrorKind::LengthNotDivisible, [&] { c.encode(eigenet::testing::random_rir(3, 8001)); });
  expect_error(ErrorKind::ShapeMismatch, [&] { c.decode(ad::Mat<float>::Zero(25, 64)); });
  CodecConfig bad;
  bad.strides = {4, 4, 4, 4};
  expect_error(ErrorKind::ConfigInvalid, [&] { bad.validate(); });
}

TEST(CodecShapes, HopMatchesSpectrumFrames) {
  const CodecConfig cfg;
  EXPECT_EQ(cfg.hop(), acoustics::token_aligned_stft(cfg.sample_rate, cfg.frame_rate).hop);
  EXPECT_EQ(acoustics::token_aligned_stft(16000, 50).frames(8000), 25);
}

TEST(CodecEncode, ZeroWaveformGivesConstantRows) {
  const auto c = FrozenCodec::initialized({}, 2);
  const auto z = c.encode(acoustics::Rir(std::vector<double>(8000, 0.0), 16000));
  for (Eigen::Index t = 1; t < z.rows(); ++t) EXPECT_EQ(z.row(t), z.row(0));
}

TEST(CodecEncode, Deterministic) {
  const auto c = FrozenCodec::initialized({}, 3);
  const auto h = eigenet::testing::random_rir(4);
  EXPECT_EQ(c.encode(h), c.encode(h));
  EXPECT_EQ(FrozenCodec::initialized({}, 3).hash(), c.hash());
  EXPECT_NE(FrozenCodec::initialized({}, 4).hash(), c.hash());
}

TEST(CodecGradients, DecoderPassesGradientToLatents) {
  nn::ParamStore<double> ps;
  const auto cfg = tiny_config();
  Codec arch(nn::Scope<double>(ps, Rng(5), kCodecNamespace), cfg);
  ps.set_trainable(kCodecNamespace, false);
  Rng rng(6);
  M z0(16, cfg.latent_dim);
  for (Eigen::Index i = 0; i < z0.size(); ++i) z0.data()[i] = rng.uniform(-1, 1);
  auto z = ps.add("z", z0);
  const auto th = eigenet::testing::exponential_rir(0.05, 7, 64, 200);
  const M target = Eigen::Map<const M>(th.samples.data(), 1, 64);
  acoustics::MrstftConfig mr;
  mr.fft_sizes = {16, 32};
  const auto report = nn::check_gradients(
      [&](const nn::ParamStore<double>& p) {
        auto y = arch.decode(p, p[z]);
        return ad::add(acoustics::mrstft_loss<double>(y, ad::constant<double>(target), mr),
                       acoustics::edc_loss<double>(y, ad::constant<double>(target)));
      },
      ps);
  ASSERT_EQ(report.blocks.size(), 1u);
  EXPECT_EQ(report.blocks[0].name, "z");
  EXPECT_GT(report.blocks[0].scale, 0.0);
  EXPECT_LE(report.max_rel_error(), 1e-3);
}

TEST(CodecGradients, FullAutoencoder) {
  nn::ParamStore<double> ps;
  const auto cfg = tiny_config();
  Codec arch(nn::Scope<double>(ps, Rng(8), kCodecNamespace), cfg);
  Rng rng(9);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    auto& m = ps.value(i);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] += rng.uniform(-0.1, 0.1);
  }
  const auto h = eigenet::testing::exponential_rir(0.05, 10, 64, 200);
  const M x = Eigen::Map<const M>(h.samples.data(), 1, 64);
  acoustics::MrstftConfig mr;
  mr.fft_sizes = {16, 32};
  const auto report = nn::check_gradients(
      [&](const nn::ParamStore<double>& p) {
        auto xv = ad::constant<double>(x);
        return acoustics::mrstft_loss<double>(arch.decode(p, arch.encode(p, xv)), xv, mr);
      },
      ps);
  for (const auto& b : report.blocks) EXPECT_LE(b.rel_error, 1e-3) << b.name;
}

TEST(TargetProxyTokens, ShapeDeterminismDistinctRows) {
  nn::ParamStore<float> ps;
  TargetProxy proxy(nn::Scope<float>(ps, Rng(11), "proxy"), 64, 128);
  ps.set_training(false);
  const auto a = target_proxy_tokens(proxy, ps, 25).value();
  const auto b = target_proxy_tokens(proxy, ps, 25).value();
  EXPECT_EQ(a.rows(), 25);
  EXPECT_EQ(a.cols(), 128);
  EXPECT_EQ(a, b);
  for (int i = 0; i < 25; ++i)
    for (int j = i + 1; j < 25; ++j) EXPECT_GT((a.row(i) - a.row(j)).cwiseAbs().maxCoeff(), 0.0f);
}

TEST(Pretraining, LossDecreasesAndIsReproducible) {
  const auto rirs = corpus_rirs(2);
  const auto train = pointers(rirs, 0, 30), val = pointers(rirs, 30, 40);
  CodecTrainConfig tc;
  tc.max_steps = 100;
  tc.min_steps = 100;
  tc.batch = 2;
  tc.log_every = 10;
  tc.eval_every = 100;
  tc.seed = 3;
  const auto r = pretrain_codec(train, val, {}, tc);
  ASSERT_EQ(r.log.size(), 10u);
  const double first = (r.log[0].loss + r.log[1].loss) / 2, last = (r.log[8].loss + r.log[9].loss) / 2;
  EXPECT_LT(last, first);
  EXPECT_EQ(r.steps, 100);
  EXPECT_EQ(r.gate.evaluated + r.gate.excluded, val.size());

  tc.max_steps = tc.min_steps = 10;
  const auto a = pretrain_codec(train, val, {}, tc);
  const auto b = pretrain_codec(train, val, {}, tc);
  EXPECT_EQ(a.codec.hash(), b.codec.hash());
}

TEST(Pretraining, GateReporting) {
  const auto rirs = corpus_rirs(1);
  const auto c = FrozenCodec::initialized({}, 12);
  const auto all = pointers(rirs, 0, rirs.size());
  const QualityGate impossible{0.0, 0.0, 0.0};
  const auto g = evaluate_codec(c, all, impossible);
  EXPECT_FALSE(g.passed);
  EXPECT_EQ(g.evaluated + g.excluded, all.size());
  expect_error(ErrorKind::QualityGateNotMet, [&] { require_gate(g, impossible); });
  expect_error(ErrorKind::EmptyInput, [&] { pretrain_codec({}, all, {}, {}); });
}

TEST(Pretraining, CheckpointRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "eigenet_test_codec_ckpt";
  std::filesystem::remove_all(dir);
  CodecConfig cfg;
  cfg.latent_dim = 32;
  const auto c = FrozenCodec::initialized(cfg, 13);
  save_codec(dir, c, {{"note", "test"}});
  const auto loaded = load_codec(dir);
  EXPECT_EQ(loaded.codec.hash(), c.hash());
  EXPECT_EQ(loaded.codec.arch().config().latent_dim, 32);
  const auto h = eigenet::testing::random_rir(14);
  EXPECT_EQ(loaded.codec.encode(h), c.encode(h));
  std::filesystem::remove_all(dir);
}
