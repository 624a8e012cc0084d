#pragma once

// Convolutional RIR autoencoder standing in for a pretrained neural audio
// codec. Continuous latents, no quantizer. Encoder stages are strided
// convolutions (kernel = 2·stride) each followed by ELU and a residual unit;
// the decoder mirrors them with transposed convolutions.

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "json.hpp"

#include "eigenet/acoustics/rir.hpp"
#include "eigenet/ad/conv.hpp"
#include "eigenet/nn/layers.hpp"

namespace eigenet::codec {

using ad::Mat;
using ad::Var;
using nn::ParamRef;
using nn::ParamStore;
using nn::Scope;

struct CodecConfig {
  int sample_rate = acoustics::kDefaultSampleRate;
  int frame_rate = 50;
  int latent_dim = 128;
  std::vector<int> strides{4, 4, 4, 5};
  /// Hidden widths after the first len(strides)−1 stages; the last stage emits latent_dim.
  std::vector<int> channels{32, 64, 128};
  int residual_units = 1;

  int hop() const { return sample_rate / frame_rate; }

  void validate() const {
    require(frame_rate > 0 && sample_rate % frame_rate == 0, ErrorKind::ConfigInvalid,
            "frame_rate must divide sample_rate");
    require(!strides.empty() && channels.size() + 1 == strides.size(), ErrorKind::ConfigInvalid,
            "need one hidden width per non-final stage");
    const int prod = std::accumulate(strides.begin(), strides.end(), 1, std::multiplies<>());
    require(prod == hop(), ErrorKind::ConfigInvalid, "stride product must equal sample_rate / frame_rate");
    require(latent_dim > 0 && residual_units >= 0, ErrorKind::ConfigInvalid, "latent_dim and residual_units");
  }
};

inline void to_json(nlohmann::json& j, const CodecConfig& c) {
  j = {{"sample_rate", c.sample_rate}, {"frame_rate", c.frame_rate}, {"latent_dim", c.latent_dim},
       {"strides", c.strides},         {"channels", c.channels},     {"residual_units", c.residual_units}};
}
inline void from_json(const nlohmann::json& j, CodecConfig& c) {
  const CodecConfig d;
  c.sample_rate = j.value("sample_rate", d.sample_rate);
  c.frame_rate = j.value("frame_rate", d.frame_rate);
  c.latent_dim = j.value("latent_dim", d.latent_dim);
  c.strides = j.value("strides", d.strides);
  c.channels = j.value("channels", d.channels);
  c.residual_units = j.value("residual_units", d.residual_units);
}

/// Weight C_out × (C_in·k) for conv1d, or C_in × (C_out·k) for the transposed form.
struct ConvParams {
  ParamRef w, b;
  ad::Conv1dGeometry geo;

  ConvParams() = default;
  template <typename T>
  ConvParams(const Scope<T>& s, int rows, int cols, int bias, ad::Conv1dGeometry g, int fan_in) : geo(g) {
    w = s.normal("w", rows, cols, 1.0 / std::sqrt(static_cast<double>(fan_in)));
    b = s.zeros("b", 1, bias);
  }

  template <typename T>
  Var<T> conv(const ParamStore<T>& ps, const Var<T>& x) const {
    return ad::conv1d(x, ps[w], ps[b], geo);
  }
  template <typename T>
  Var<T> transposed(const ParamStore<T>& ps, const Var<T>& x) const {
    return ad::conv_transpose1d(x, ps[w], ps[b], geo);
  }
};

/// x + conv1×1(ELU(conv3(ELU(x)))).
struct ResidualUnit {
  ConvParams c3, c1;

  ResidualUnit() = default;
  template <typename T>
  ResidualUnit(const Scope<T>& s, int ch)
      : c3(s.child("c3"), ch, ch * 3, ch, {3, 1, 1, 1}, ch * 3), c1(s.child("c1"), ch, ch, ch, {1, 1, 0, 0}, ch) {}

  template <typename T>
  Var<T> operator()(const ParamStore<T>& ps, const Var<T>& x) const {
    return ad::add(x, c1.conv(ps, ad::elu(c3.conv(ps, ad::elu(x)))));
  }
};

inline ad::Conv1dGeometry stage_geometry(int stride) {
  return {2 * stride, stride, stride / 2, stride - stride / 2};
}

class Codec {
 public:
  Codec() = default;
  template <typename T>
  Codec(const Scope<T>& s, const CodecConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    const auto n = cfg.strides.size();
    std::vector<int> widths{1};
    widths.insert(widths.end(), cfg.channels.begin(), cfg.channels.end());
    widths.push_back(cfg.latent_dim);
    for (std::size_t i = 0; i < n; ++i) {
      const int k = 2 * cfg.strides[i];
      const auto geo = stage_geometry(cfg.strides[i]);
      auto es = s.child("encoder.stage" + std::to_string(i));
      enc_.push_back({ConvParams(es.child("down"), widths[i + 1], widths[i] * k, widths[i + 1], geo, widths[i] * k), {}});
      if (i + 1 < n)
        for (int r = 0; r < cfg.residual_units; ++r)
          enc_.back().res.emplace_back(es.child("res" + std::to_string(r)), widths[i + 1]);
    }
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t i = n - 1 - j;  // mirror of encoder stage i
      const int k = 2 * cfg.strides[i];
      const auto geo = stage_geometry(cfg.strides[i]);
      auto ds = s.child("decoder.stage" + std::to_string(j));
      dec_.push_back({ConvParams(ds.child("up"), widths[i + 1], widths[i] * k, widths[i], geo,
                                 widths[i + 1] * k / cfg.strides[i]),
                      {}});
      if (i > 0)
        for (int r = 0; r < cfg.residual_units; ++r)
          dec_.back().res.emplace_back(ds.child("res" + std::to_string(r)), widths[i]);
    }
  }

  const CodecConfig& config() const { return cfg_; }
  int hop() const { return cfg_.hop(); }
  int tokens_for(std::size_t length) const { return static_cast<int>(length) / hop(); }

  /// 1 × L waveform → n × latent_dim tokens, n = L / hop.
  template <typename T>
  Var<T> encode(const ParamStore<T>& ps, const Var<T>& x) const {
    require(x.rows() == 1, ErrorKind::ShapeMismatch, "codec input must be a row");
    require(x.cols() % hop() == 0, ErrorKind::LengthNotDivisible,
            "waveform length " + std::to_string(x.cols()) + " not divisible by hop " + std::to_string(hop()));
    Var<T> h = x;
    for (std::size_t i = 0; i < enc_.size(); ++i) {
      h = enc_[i].conv.conv(ps, h);
      if (i + 1 < enc_.size()) {
        h = ad::elu(h);
        for (const auto& r : enc_[i].res) h = r(ps, h);
      }
    }
    return ad::transpose(h);
  }

  /// n × latent_dim tokens → 1 × (n·hop) waveform.
  template <typename T>
  Var<T> decode(const ParamStore<T>& ps, const Var<T>& z) const {
    require(z.cols() == cfg_.latent_dim && z.rows() > 0, ErrorKind::ShapeMismatch,
            "latent tokens must have latent_dim columns");
    Var<T> h = ad::transpose(z);
    for (std::size_t j = 0; j < dec_.size(); ++j) {
      h = dec_[j].conv.transposed(ps, h);
      if (j + 1 < dec_.size()) {
        h = ad::elu(h);
        for (const auto& r : dec_[j].res) h = r(ps, h);
      }
    }
    return h;
  }

 private:
  struct Stage {
    ConvParams conv;
    std::vector<ResidualUnit> res;
  };
  CodecConfig cfg_;
  std::vector<Stage> enc_, dec_;
};

/// Parameters live under this prefix inside any store holding a codec.
inline constexpr const char* kCodecNamespace = "codec";

/// A codec with its own (frozen) float parameters, for plain waveform I/O.
class FrozenCodec {
 public:
  FrozenCodec() = default;
  FrozenCodec(const CodecConfig& cfg, ParamStore<float> params) : params_(std::move(params)) {
    ParamStore<float> shape;
    arch_ = Codec(Scope<float>(shape, Rng(0), kCodecNamespace), cfg);
    shape.assign_from(params_);  // verifies names and shapes
    params_.set_training(false);
  }
  static FrozenCodec initialized(const CodecConfig& cfg, std::uint64_t seed) {
    ParamStore<float> ps;
    Codec arch(Scope<float>(ps, Rng(seed), kCodecNamespace), cfg);
    return FrozenCodec(cfg, std::move(ps));
  }

  const Codec& arch() const { return arch_; }
  const ParamStore<float>& params() const { return params_; }
  ParamStore<float>& params() { return params_; }
  std::uint64_t hash() const { return params_.hash(kCodecNamespace); }

  Mat<float> encode(const acoustics::Rir& h) const {
    Mat<float> x(1, static_cast<Eigen::Index>(h.size()));
    for (std::size_t i = 0; i < h.size(); ++i) x(0, static_cast<Eigen::Index>(i)) = static_cast<float>(h.samples[i]);
    return arch_.encode(params_, ad::constant<float>(std::move(x))).value();
  }

  acoustics::Rir decode(const Mat<float>& z) const {
    const auto y = arch_.decode(params_, ad::constant<float>(z)).value();
    std::vector<double> s(static_cast<std::size_t>(y.cols()));
    for (Eigen::Index i = 0; i < y.cols(); ++i) s[static_cast<std::size_t>(i)] = y(0, i);
    return acoustics::Rir(std::move(s), arch_.config().sample_rate);
  }

 private:
  Codec arch_;
  ParamStore<float> params_;
};

/// Content-free target placeholder T₀ = MLP(SPE(0..n−1)): sinusoidal
/// encoding of the token positions lifted by a trainable two-layer MLP.
struct TargetProxy {
  nn::Mlp mlp;
  int pe_dim = 0;

  TargetProxy() = default;
  template <typename T>
  TargetProxy(const Scope<T>& s, int pe, int dim) : mlp(s.child("mlp"), pe, 4 * dim, dim), pe_dim(pe) {}

  template <typename T>
  Var<T> operator()(const ParamStore<T>& ps, int n) const {
    return mlp(ps, ad::constant<T>(nn::sinusoidal_encoding<T>(n, pe_dim)));
  }
};

template <typename T>
Var<T> target_proxy_tokens(const TargetProxy& proxy, const ParamStore<T>& ps, int n) {
  return proxy(ps, n);
}

}  // namespace eigenet::codec
