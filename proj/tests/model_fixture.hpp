#pragma once

// Tiny double-precision model, frozen decoder and one synthetic scene,
// shared by the model tests and the acceptance harness.

#include <optional>

#include "eigenet/model/eigenet.hpp"
#include "eigenet/simulator/depth.hpp"

namespace eigenet::testing {

using M = ad::Mat<double>;

inline model::ModelConfig tiny_config(model::AttentionKind kind = model::AttentionKind::AA) {
  model::ModelConfig c;
  c.attention = kind;
  c.n = 5;
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

inline codec::CodecConfig tiny_codec() {
  codec::CodecConfig c;
  c.latent_dim = 4;
  c.channels = {2, 2, 2};
  return c;
}

inline M random_mat(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  M m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

/// A model, a frozen double-precision decoder and one synthetic scene.
struct Fixture {
  model::ModelConfig cfg;
  nn::ParamStore<double> ps, codec_ps;
  model::EigeNet net;
  codec::Codec codec;
  M points;
  std::vector<sim::Vec3> tx, rx;
  std::vector<M> latents;

  explicit Fixture(model::ModelConfig c, int refs = 2, double randomize = 0.0, std::uint64_t seed = 1) : cfg(c) {
    net = model::EigeNet(nn::Scope<double>(ps, Rng(seed)), cfg);
    if (randomize > 0.0) {
      Rng rng(seed + 100);
      for (std::size_t i = 0; i < ps.size(); ++i) {
        auto& m = ps.value(i);
        for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] += rng.uniform(-randomize, randomize);
      }
    }
    auto cc = tiny_codec();
    cc.latent_dim = cfg.codec_latent_dim;
    codec = codec::Codec(nn::Scope<double>(codec_ps, Rng(seed + 1), codec::kCodecNamespace), cc);
    codec_ps.set_training(false);
    const auto room = sim::Room::uniform({4.0, 3.0, 2.5}, 0.3);
    points = sim::back_project(sim::render_panoramic_depth(room, {1.5, 1.2, 1.1}, cfg.depth_height, cfg.depth_width));
    Rng rng(seed + 2);
    for (int v = 0; v <= refs; ++v) {
      tx.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-0.5, 0.5));
      rx.push_back(sim::Vec3::Zero());
      if (v > 0) latents.push_back(random_mat(cfg.n, cfg.codec_latent_dim, seed + 10 + v));
    }
  }

  model::DecoderRef<double> decoder() const { return {&codec, &codec_ps}; }

  std::vector<const M*> latent_ptrs() const {
    std::vector<const M*> out;
    for (const auto& l : latents) out.push_back(&l);
    return out;
  }

  model::Prediction<double> forward(const std::optional<model::ProbeSpec>& probe = std::nullopt) const {
    return net.forward(ps, decoder(), points, cfg.depth_height, cfg.depth_width, tx, rx, latent_ptrs(), probe);
  }
};

}  // namespace eigenet::testing
