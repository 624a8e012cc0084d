#pragma once

#include <optional>
#include <string>
#include <vector>

#include "eigenet/codec/codec.hpp"
#include "eigenet/dataset/scene.hpp"
#include "eigenet/model/config.hpp"
#include "eigenet/nn/layers.hpp"
#include "eigenet/simulator/depth.hpp"

namespace eigenet::model {

using ad::Mat;
using ad::Var;
using nn::AttentionGroup;
using nn::ParamStore;
using nn::Scope;
using sim::Vec3;

/// Inference-time key/value masking of reference tokens. Reference views
/// 1..keep stay visible; the rest lose their geometric (MaskGeo) or acoustic
/// (MaskAc) tokens as keys in every attention layer.
struct ProbeSpec {
  enum class Mode { MaskGeo, MaskAc };
  Mode mode = Mode::MaskGeo;
  int keep = 0;
};

inline std::string to_string(ProbeSpec::Mode m) { return m == ProbeSpec::Mode::MaskGeo ? "geo" : "ac"; }

/// One view's tokens: V_i = [G_i ; A_i], (1+n) × f.
template <typename T>
struct ViewTokens {
  Var<T> geo;
  Var<T> acoustic;
};

template <typename T>
struct BackboneOutput {
  Var<T> local;   // n × f, target acoustic rows after the last local layer
  Var<T> global;  // n × f, target acoustic rows after the last layer
};

template <typename T>
struct Prediction {
  Var<T> rir;       // 1 × L
  Var<T> spectrum;  // n × bins, undefined when the spectrum target is off
  Var<T> latent;    // n × codec latent dim
};

/// Codec decoder parameters in the model's scalar type.
template <typename T>
struct DecoderRef {
  const codec::Codec* arch = nullptr;
  const ParamStore<T>* params = nullptr;
};

/// Stacks views in index order (target first), geometric token before the
/// acoustic tokens of each view.
template <typename T>
Var<T> assemble_sequence(const std::vector<ViewTokens<T>>& views) {
  require(!views.empty(), ErrorKind::HeterogeneousShapes, "no views to assemble");
  const auto n = views.front().acoustic.rows();
  const auto f = views.front().acoustic.cols();
  std::vector<Var<T>> parts;
  for (const auto& v : views) {
    require(v.geo.rows() == 1 && v.geo.cols() == f && v.acoustic.rows() == n && v.acoustic.cols() == f,
            ErrorKind::HeterogeneousShapes, "view token shapes differ");
    parts.push_back(v.geo);
    parts.push_back(v.acoustic);
  }
  return ad::concat_rows(parts);
}

/// Receiver-frame points (point − tx ; point − rx) as a 6 × (H·W) image.
template <typename T>
Mat<T> geometry_image(const Mat<T>& points, const Vec3& tx, const Vec3& rx) {
  Mat<T> img(6, points.cols());
  for (int a = 0; a < 3; ++a) {
    img.row(a) = points.row(a).array() - static_cast<T>(tx[a]);
    img.row(3 + a) = points.row(a).array() - static_cast<T>(rx[a]);
  }
  return img;
}

class EigeNet {
 public:
  EigeNet() = default;

  template <typename T>
  EigeNet(const Scope<T>& s, const ModelConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    const bool depth = cfg.geometry_inputs != GeometryInputs::LocationOnly;
    const bool coords = cfg.geometry_inputs != GeometryInputs::DepthOnly;
    auto g = s.child("geometry");
    if (depth) {
      patch_ = nn::PatchEmbed(g.child("patch"), 6, cfg.patch_h, cfg.patch_w, cfg.vit_dim);
      const int patches = (cfg.depth_height / cfg.patch_h) * (cfg.depth_width / cfg.patch_w);
      cls_ = g.normal("cls", 1, cfg.vit_dim);
      pos_ = g.normal("pos", patches + 1, cfg.vit_dim);
      for (int i = 0; i < cfg.vit_layers; ++i)
        vit_.emplace_back(g.child("vit" + std::to_string(i)), cfg.vit_dim, cfg.vit_heads);
      vit_norm_ = nn::LayerNorm(g.child("vit_norm"), cfg.vit_dim);
    }
    if (coords) coord_mlp_ = nn::Mlp(g.child("coord"), 6 * 2 * cfg.coord_freqs, cfg.coord_hidden, cfg.coord_dim);
    geo_proj_ = nn::Linear(g.child("proj"), (depth ? cfg.vit_dim : 0) + (coords ? cfg.coord_dim : 0), cfg.f);

    proxy_ = codec::TargetProxy(s.child("proxy"), cfg.proxy_pe_dim, cfg.f);
    if (cfg.modulation_active()) modulation_ = nn::AdaLNBlock(s.child("modulation"), cfg.f, cfg.heads);
    if (cfg.spectrum_bins() > 0) spectrum_head_ = nn::Linear(s.child("spectrum_head"), cfg.f, cfg.spectrum_bins());
    if (cfg.codec_latent_dim != cfg.f) ref_proj_ = nn::Linear(s.child("ref_proj"), cfg.codec_latent_dim, cfg.f);

    for (int i = 0; i < cfg.layer_count(); ++i)
      layers_.emplace_back(s.child("backbone.layer" + std::to_string(i)), cfg.f, cfg.heads);
    norm_local_ = nn::LayerNorm(s.child("head.norm_local"), cfg.f);
    norm_global_ = nn::LayerNorm(s.child("head.norm_global"), cfg.f);
    head_ = nn::Linear(s.child("head.proj"), 2 * cfg.f, cfg.codec_latent_dim);
  }

  const ModelConfig& config() const { return cfg_; }
  Eigen::Index view_rows() const { return 1 + cfg_.n; }

  // ------------------------------------------------------------ encoders

  /// Geometric tokens for several views of one scene, one row per view.
  /// `points` is the 3 × (H·W) back-projection of the scene's depth map.
  template <typename T>
  Var<T> encode_geometry(const ParamStore<T>& ps, const Mat<T>& points, int height, int width,
                         const std::vector<Vec3>& tx, const std::vector<Vec3>& rx) const {
    require(tx.size() == rx.size() && !tx.empty(), ErrorKind::ShapeMismatch, "one tx and rx per view");
    const auto views = static_cast<Eigen::Index>(tx.size());
    std::vector<Var<T>> parts;
    if (cfg_.geometry_inputs != GeometryInputs::LocationOnly) {
      require(height == cfg_.depth_height && width == cfg_.depth_width && points.cols() == static_cast<Eigen::Index>(height) * width,
              ErrorKind::ConventionMismatch, "depth map resolution differs from the model configuration");
      // All views go through the ViT as one sequence with per-view attention groups.
      const Eigen::Index tokens = ps[pos_].rows();
      std::vector<Var<T>> seq;
      std::vector<AttentionGroup> groups;
      for (Eigen::Index v = 0; v < views; ++v) {
        auto patches = patch_(ps, geometry_image<T>(points, tx[static_cast<std::size_t>(v)], rx[static_cast<std::size_t>(v)]),
                              height, width);
        seq.push_back(ad::add(ad::concat_rows<T>({ps[cls_], patches}), ps[pos_]));
        groups.push_back({v * tokens, tokens, v * tokens, tokens});
      }
      Var<T> h = ad::concat_rows(seq);
      for (const auto& layer : vit_) h = layer(ps, h, groups);
      h = vit_norm_(ps, h);
      std::vector<Var<T>> cls;
      for (Eigen::Index v = 0; v < views; ++v) cls.push_back(ad::slice_rows(h, v * tokens, 1));
      parts.push_back(ad::concat_rows(cls));
    }
    if (cfg_.geometry_inputs != GeometryInputs::DepthOnly) {
      Mat<T> enc(views, 6 * 2 * cfg_.coord_freqs);
      for (Eigen::Index v = 0; v < views; ++v) {
        const auto& t = tx[static_cast<std::size_t>(v)];
        const auto& r = rx[static_cast<std::size_t>(v)];
        enc.row(v) = nn::coordinate_encoding<T>({t.x(), t.y(), t.z(), r.x(), r.y(), r.z()}, cfg_.coord_freqs).row(0);
      }
      parts.push_back(coord_mlp_(ps, ad::constant<T>(std::move(enc))));
    }
    return geo_proj_(ps, parts.size() == 1 ? parts.front() : ad::concat_cols(parts));
  }

  template <typename T>
  Var<T> target_proxy(const ParamStore<T>& ps) const {
    return codec::target_proxy_tokens(proxy_, ps, cfg_.n);
  }

  /// A₀ = adaLN-DiT(T₀ | G₀), or T₀ itself when modulation is inactive.
  template <typename T>
  Var<T> modulate_target(const ParamStore<T>& ps, const Var<T>& t0, const Var<T>& g0) const {
    if (!cfg_.modulation_active()) return t0;
    return modulation_(ps, t0, g0);
  }

  template <typename T>
  Var<T> spectrum_head(const ParamStore<T>& ps, const Var<T>& a0) const {
    require(cfg_.spectrum_target != SpectrumTarget::None, ErrorKind::VariantDisabled,
            "spectrum head is disabled for spectrum_target = none");
    return spectrum_head_(ps, a0);
  }

  /// Codec latents of a reference view lifted to model width if they differ.
  template <typename T>
  Var<T> reference_tokens(const ParamStore<T>& ps, const Mat<T>& latent) const {
    require(latent.rows() == cfg_.n && latent.cols() == cfg_.codec_latent_dim, ErrorKind::ShapeMismatch,
            "reference latent shape");
    auto z = ad::constant<T>(latent);
    return ref_proj_.w.valid() ? ref_proj_(ps, z) : z;
  }

  // ------------------------------------------------------------ backbone

  /// Visibility of every row of an (N+1)(1+n) sequence under a probe.
  std::vector<char> key_visibility(int num_refs, const std::optional<ProbeSpec>& probe) const {
    if (!probe) return {};
    require(probe->keep >= 0 && probe->keep <= num_refs, ErrorKind::ConfigInvalid,
            "probe keep count exceeds the number of references");
    const Eigen::Index vr = view_rows();
    std::vector<char> vis(static_cast<std::size_t>((num_refs + 1) * vr), 1);
    for (int i = probe->keep + 1; i <= num_refs; ++i) {
      const Eigen::Index base = i * vr;
      if (probe->mode == ProbeSpec::Mode::MaskGeo) {
        vis[static_cast<std::size_t>(base)] = 0;
      } else {
        for (Eigen::Index r = 1; r < vr; ++r) vis[static_cast<std::size_t>(base + r)] = 0;
      }
    }
    return vis;
  }

  /// Applies backbone layer `i` to the whole sequence.
  template <typename T>
  Var<T> apply_layer(const ParamStore<T>& ps, int i, const Var<T>& h, int num_views,
                     const std::vector<char>& visible) const {
    const Eigen::Index vr = view_rows();
    const Eigen::Index total = num_views * vr;
    require(h.rows() == total, ErrorKind::ShapeMismatch, "sequence length does not match view count");
    const auto& layer = layers_[static_cast<std::size_t>(i)];
    switch (cfg_.attention) {
      case AttentionKind::AA:
        if (i % 2 == 0) {
          std::vector<AttentionGroup> groups;
          for (int v = 0; v < num_views; ++v) groups.push_back({v * vr, vr, v * vr, vr});
          return layer(ps, h, groups, visible);
        }
        return layer(ps, h, nn::full_attention(total), visible);
      case AttentionKind::SA:
        return layer(ps, h, nn::full_attention(total), visible);
      case AttentionKind::CA: {
        require(num_views > 1, ErrorKind::AllKeysMasked, "cross-attention needs at least one reference");
        const Eigen::Index refs = total - vr;
        if (i % 2 == 0) return layer(ps, h, {{vr, refs, vr, refs}}, visible, vr, refs);
        return layer(ps, h, {{0, vr, vr, refs}}, visible, 0, vr);
      }
    }
    return h;
  }

  template <typename T>
  BackboneOutput<T> backbone_forward(const ParamStore<T>& ps, const Var<T>& h0, int num_views,
                                     const std::optional<ProbeSpec>& probe = std::nullopt) const {
    const auto visible = key_visibility(num_views - 1, probe);
    Var<T> h = h0;
    Var<T> local;
    for (int i = 0; i < cfg_.layer_count(); ++i) {
      h = apply_layer(ps, i, h, num_views, visible);
      if (cfg_.attention == AttentionKind::AA && i == cfg_.layer_count() - 2) local = ad::slice_rows(h, 1, cfg_.n);
    }
    auto global = ad::slice_rows(h, 1, cfg_.n);
    // Backbones without a local/global split fill both head slots with the final features.
    return {local.defined() ? local : global, global};
  }

  /// Ẑ₀ = Linear([LN(local) ; LN(global)]).
  template <typename T>
  Var<T> predict_latent(const ParamStore<T>& ps, const BackboneOutput<T>& feats) const {
    return head_(ps, ad::concat_cols<T>({norm_local_(ps, feats.local), norm_global_(ps, feats.global)}));
  }

  // ------------------------------------------------------------ end to end

  /// Full forward pass. `ref_latents[i]` are the codec latents of reference
  /// i; `tx[0]` is the target source, `tx[1..]` the references.
  template <typename T>
  Prediction<T> forward(const ParamStore<T>& ps, const DecoderRef<T>& decoder, const Mat<T>& points, int height,
                        int width, const std::vector<Vec3>& tx, const std::vector<Vec3>& rx,
                        const std::vector<const Mat<T>*>& ref_latents,
                        const std::optional<ProbeSpec>& probe = std::nullopt) const {
    require(tx.size() == ref_latents.size() + 1, ErrorKind::ShapeMismatch, "one pose per view");
    const int views = static_cast<int>(tx.size());
    auto geo = encode_geometry(ps, points, height, width, tx, rx);
    auto g0 = ad::slice_rows(geo, 0, 1);
    auto a0 = modulate_target(ps, target_proxy(ps), g0);

    Prediction<T> out;
    if (cfg_.spectrum_target != SpectrumTarget::None) out.spectrum = spectrum_head(ps, a0);

    std::vector<ViewTokens<T>> tokens{{g0, a0}};
    for (int i = 1; i < views; ++i)
      tokens.push_back({ad::slice_rows(geo, i, 1), reference_tokens(ps, *ref_latents[static_cast<std::size_t>(i - 1)])});
    auto feats = backbone_forward(ps, assemble_sequence(tokens), views, probe);
    out.latent = predict_latent(ps, feats);
    out.rir = decoder.arch->decode(*decoder.params, out.latent);
    return out;
  }

 private:
  ModelConfig cfg_;
  nn::PatchEmbed patch_;
  nn::ParamRef cls_, pos_;
  std::vector<nn::TransformerLayer> vit_;
  nn::LayerNorm vit_norm_;
  nn::Mlp coord_mlp_;
  nn::Linear geo_proj_;
  codec::TargetProxy proxy_;
  nn::AdaLNBlock modulation_;
  nn::Linear spectrum_head_;
  nn::Linear ref_proj_;
  std::vector<nn::TransformerLayer> layers_;
  nn::LayerNorm norm_local_, norm_global_;
  nn::Linear head_;
};

}  // namespace eigenet::model
