#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "eigenet/ad/attention.hpp"
#include "eigenet/ad/ops.hpp"
#include "eigenet/nn/params.hpp"

namespace eigenet::nn {

using ad::AttentionGroup;

/// y = x·W + b, W is (in × out). Weights ~ truncated N(0, 0.02²), bias 0.
struct Linear {
  ParamRef w, b;
  int in = 0, out = 0;

  Linear() = default;
  template <typename T>
  Linear(const Scope<T>& s, int in_dim, int out_dim) : in(in_dim), out(out_dim) {
    w = s.normal("w", in_dim, out_dim);
    b = s.zeros("b", 1, out_dim);
  }

  template <typename T>
  Var<T> operator()(const ParamStore<T>& ps, const Var<T>& x) const {
    return ad::linear(x, ps[w], ps[b]);
  }
};

/// Layer normalization with learned per-feature gain and offset.
struct LayerNorm {
  ParamRef gamma, beta;

  LayerNorm() = default;
  template <typename T>
  LayerNorm(const Scope<T>& s, int dim) {
    gamma = s.ones("gamma", 1, dim);
    beta = s.zeros("beta", 1, dim);
  }

  template <typename T>
  Var<T> operator()(const ParamStore<T>& ps, const Var<T>& x) const {
    return ad::add_row(ad::mul_row(ad::layer_norm(x), ps[gamma]), ps[beta]);
  }
};

/// Linear → GELU → Linear.
struct Mlp {
  Linear fc1, fc2;

  Mlp() = default;
  template <typename T>
  Mlp(const Scope<T>& s, int in_dim, int hidden, int out_dim)
      : fc1(s.child("fc1"), in_dim, hidden), fc2(s.child("fc2"), hidden, out_dim) {}

  template <typename T>
  Var<T> operator()(const ParamStore<T>& ps, const Var<T>& x) const {
    return fc2(ps, ad::gelu(fc1(ps, x)));
  }
};

/// Multi-head scaled dot-product attention over one token sequence. Which
/// queries see which keys is described by `groups`; `key_visible` removes
/// keys everywhere. The caller adds the residual.
struct MultiHeadAttention {
  Linear q, k, v, o;
  int heads = 1;

  MultiHeadAttention() = default;
  template <typename T>
  MultiHeadAttention(const Scope<T>& s, int dim, int n_heads)
      : q(s.child("q"), dim, dim), k(s.child("k"), dim, dim), v(s.child("v"), dim, dim),
        o(s.child("o"), dim, dim), heads(n_heads) {
    require(n_heads > 0 && dim % n_heads == 0, ErrorKind::ConfigInvalid, "heads must divide model dim");
  }

  template <typename T>
  Var<T> operator()(const ParamStore<T>& ps, const Var<T>& x, const std::vector<AttentionGroup>& groups,
                    const std::vector<char>& key_visible = {}) const {
    return o(ps, pre_output(ps, x, groups, key_visible));
  }

  /// Attention-weighted values before the output projection.
  template <typename T>
  Var<T> pre_output(const ParamStore<T>& ps, const Var<T>& x, const std::vector<AttentionGroup>& groups,
                    const std::vector<char>& key_visible = {}) const {
    return ad::attention(q(ps, x), k(ps, x), v(ps, x), heads, groups, key_visible);
  }
};

/// Every row attends to every row of an m-token sequence.
inline std::vector<AttentionGroup> full_attention(Eigen::Index m) { return {{0, m, 0, m}}; }

namespace detail {

/// x with rows [r0, r0+rn) replaced by those rows plus `delta` (rn rows).
template <typename T>
Var<T> add_to_rows(const Var<T>& x, const Var<T>& delta, Eigen::Index r0, Eigen::Index rn) {
  if (r0 == 0 && rn == x.rows()) return ad::add(x, delta);
  std::vector<Var<T>> parts;
  if (r0 > 0) parts.push_back(ad::slice_rows(x, 0, r0));
  parts.push_back(ad::add(ad::slice_rows(x, r0, rn), delta));
  if (r0 + rn < x.rows()) parts.push_back(ad::slice_rows(x, r0 + rn, x.rows() - r0 - rn));
  return ad::concat_rows(parts);
}

}  // namespace detail

/// Pre-norm transformer layer: x + MSA(LN(x)), then x + MLP(LN(x)).
/// Only rows [r0, r0+rn) are updated; the rest pass through untouched
/// (used when only some tokens act as queries).
struct TransformerLayer {
  LayerNorm ln1, ln2;
  MultiHeadAttention attn;
  Mlp mlp;

  TransformerLayer() = default;
  template <typename T>
  TransformerLayer(const Scope<T>& s, int dim, int heads, int mlp_ratio = 4)
      : ln1(s.child("ln1"), dim), ln2(s.child("ln2"), dim), attn(s.child("attn"), dim, heads),
        mlp(s.child("mlp"), dim, mlp_ratio * dim, dim) {}

  template <typename T>
  Var<T> operator()(const ParamStore<T>& ps, const Var<T>& x, const std::vector<AttentionGroup>& groups,
                    const std::vector<char>& key_visible = {}, Eigen::Index r0 = 0,
                    Eigen::Index rn = -1) const {
    if (rn < 0) rn = x.rows() - r0;
    auto a = attn(ps, ln1(ps, x), groups, key_visible);
    auto h = detail::add_to_rows(x, ad::slice_rows(a, r0, rn), r0, rn);
    auto rows = ad::slice_rows(h, r0, rn);
    return detail::add_to_rows(h, mlp(ps, ln2(ps, rows)), r0, rn);
  }
};

/// DiT block with adaLN-Zero conditioning. cond (1 × f) is mapped to
/// shift/scale/gate triples for the attention and MLP sub-layers; the gate
/// columns start at zero so the block is the identity at initialization.
struct AdaLNBlock {
  Linear modulation;
  MultiHeadAttention attn;
  Mlp mlp;
  int dim = 0;

  AdaLNBlock() = default;
  template <typename T>
  AdaLNBlock(const Scope<T>& s, int d, int heads, int mlp_ratio = 4)
      : modulation(s.child("modulation"), d, 6 * d), attn(s.child("attn"), d, heads),
        mlp(s.child("mlp"), d, mlp_ratio * d, d), dim(d) {
    auto& w = s.store().value(modulation.w);
    w.middleCols(2 * d, d).setZero();
    w.middleCols(5 * d, d).setZero();
  }

  /// LN(x)·(1 + scale) + shift.
  template <typename T>
  static Var<T> modulate(const Var<T>& x, const Var<T>& shift, const Var<T>& scale) {
    return ad::add_row(ad::mul_row(ad::layer_norm(x), ad::add_const(scale, T(1))), shift);
  }

  template <typename T>
  Var<T> operator()(const ParamStore<T>& ps, const Var<T>& x, const Var<T>& cond) const {
    require(x.cols() == dim && cond.rows() == 1 && cond.cols() == dim, ErrorKind::ShapeMismatch,
            "adaptive layer norm block shapes");
    auto m = modulation(ps, ad::silu(cond));
    auto chunk = [&](int i) { return ad::slice_cols(m, i * dim, dim); };
    auto h = modulate(x, chunk(0), chunk(1));
    auto x1 = ad::add(x, ad::mul_row(attn(ps, h, full_attention(x.rows())), chunk(2)));
    auto h2 = modulate(x1, chunk(3), chunk(4));
    return ad::add(x1, ad::mul_row(mlp(ps, h2), chunk(5)));
  }
};

/// Standard transformer positional encoding: row p holds
/// sin(p·ω_i), cos(p·ω_i) interleaved, ω_i = 10000^(−2i/dim).
template <typename T = double>
Mat<T> sinusoidal_encoding(const std::vector<double>& positions, int dim) {
  require(dim > 0 && dim % 2 == 0, ErrorKind::OddDimension, "encoding dimension must be even");
  Mat<T> out(static_cast<Eigen::Index>(positions.size()), dim);
  for (std::size_t p = 0; p < positions.size(); ++p)
    for (int i = 0; i < dim / 2; ++i) {
      const double omega = std::pow(10000.0, -2.0 * i / dim);
      out(static_cast<Eigen::Index>(p), 2 * i) = static_cast<T>(std::sin(positions[p] * omega));
      out(static_cast<Eigen::Index>(p), 2 * i + 1) = static_cast<T>(std::cos(positions[p] * omega));
    }
  return out;
}

template <typename T = double>
Mat<T> sinusoidal_encoding(int count, int dim) {
  std::vector<double> pos(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) pos[static_cast<std::size_t>(i)] = i;
  return sinusoidal_encoding<T>(pos, dim);
}

/// Encoding for continuous coordinates in meters: per coordinate,
/// sin/cos at angular frequencies 2π·2^i / period, i < n_freq.
template <typename T = double>
Mat<T> coordinate_encoding(const std::vector<double>& coords, int n_freq = 10, double period = 32.0) {
  Mat<T> out(1, static_cast<Eigen::Index>(coords.size()) * 2 * n_freq);
  Eigen::Index c = 0;
  for (double x : coords)
    for (int i = 0; i < n_freq; ++i) {
      const double omega = 2.0 * std::numbers::pi * std::ldexp(1.0, i) / period;
      out(0, c++) = static_cast<T>(std::sin(x * omega));
      out(0, c++) = static_cast<T>(std::cos(x * omega));
    }
  return out;
}

/// Non-overlapping (ph × pw) patches of a C × (H·W) image, flattened
/// channel-major then row-major inside the patch; patch rows follow the
/// patch grid in row-major order.
template <typename T>
Mat<T> extract_patches(const Mat<T>& image, int channels, int height, int width, int ph, int pw) {
  require(image.rows() == channels && image.cols() == static_cast<Eigen::Index>(height) * width,
          ErrorKind::ShapeMismatch, "image shape");
  require(ph > 0 && pw > 0 && height % ph == 0 && width % pw == 0, ErrorKind::IndivisibleShape,
          "patch size must divide the image");
  const int gh = height / ph, gw = width / pw;
  Mat<T> out(static_cast<Eigen::Index>(gh) * gw, static_cast<Eigen::Index>(channels) * ph * pw);
  for (int gi = 0; gi < gh; ++gi)
    for (int gj = 0; gj < gw; ++gj) {
      const Eigen::Index row = static_cast<Eigen::Index>(gi) * gw + gj;
      Eigen::Index col = 0;
      for (int c = 0; c < channels; ++c)
        for (int u = 0; u < ph; ++u)
          for (int v = 0; v < pw; ++v)
            out(row, col++) = image(c, static_cast<Eigen::Index>(gi * ph + u) * width + gj * pw + v);
    }
  return out;
}

/// Patch extraction followed by a shared linear projection.
struct PatchEmbed {
  Linear proj;
  int channels = 0, ph = 0, pw = 0;

  PatchEmbed() = default;
  template <typename T>
  PatchEmbed(const Scope<T>& s, int c, int patch_h, int patch_w, int out_dim)
      : proj(s.child("proj"), c * patch_h * patch_w, out_dim), channels(c), ph(patch_h), pw(patch_w) {}

  template <typename T>
  Var<T> operator()(const ParamStore<T>& ps, const Mat<T>& image, int height, int width) const {
    return proj(ps, ad::constant<T>(extract_patches(image, channels, height, width, ph, pw)));
  }
};

}  // namespace eigenet::nn
