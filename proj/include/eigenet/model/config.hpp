#pragma once

#include <string>

#include "json.hpp"

#include "eigenet/core/error.hpp"

namespace eigenet::model {

enum class AttentionKind { AA, SA, CA };
enum class SpectrumTarget { None, FullStft, Octave7 };
enum class GeometryInputs { Full, DepthOnly, LocationOnly };

NLOHMANN_JSON_SERIALIZE_ENUM(AttentionKind, {{AttentionKind::AA, "aa"}, {AttentionKind::SA, "sa"}, {AttentionKind::CA, "ca"}})
NLOHMANN_JSON_SERIALIZE_ENUM(SpectrumTarget, {{SpectrumTarget::None, "none"},
                                              {SpectrumTarget::FullStft, "full"},
                                              {SpectrumTarget::Octave7, "octave"}})
NLOHMANN_JSON_SERIALIZE_ENUM(GeometryInputs, {{GeometryInputs::Full, "full"},
                                              {GeometryInputs::DepthOnly, "depth"},
                                              {GeometryInputs::LocationOnly, "location"}})

template <typename E>
E parse_enum(const std::string& s, const char* what) {
  const auto e = nlohmann::json(s).get<E>();
  require(nlohmann::json(e).get<std::string>() == s, ErrorKind::ConfigInvalid,
          std::string("unknown ") + what + " '" + s + "'");
  return e;
}

struct ModelConfig {
  AttentionKind attention = AttentionKind::AA;
  bool use_modulation = true;
  SpectrumTarget spectrum_target = SpectrumTarget::Octave7;
  GeometryInputs geometry_inputs = GeometryInputs::Full;

  int blocks = 2;
  int f = 128;
  int heads = 8;
  int n = 25;
  int b = 7;
  int B = 513;

  int depth_height = 64;
  int depth_width = 128;
  int patch_h = 16;
  int patch_w = 32;
  int vit_dim = 64;
  int vit_layers = 2;
  int vit_heads = 4;
  int coord_freqs = 10;
  int coord_hidden = 128;
  int coord_dim = 64;
  int proxy_pe_dim = 64;

  /// Latent width of the codec this model decodes through.
  int codec_latent_dim = 128;

  int layer_count() const { return 2 * blocks; }
  int spectrum_bins() const {
    return spectrum_target == SpectrumTarget::FullStft ? B : (spectrum_target == SpectrumTarget::Octave7 ? b : 0);
  }
  /// Modulation is active only with full geometry; the geometry ablations bypass it.
  bool modulation_active() const { return use_modulation && geometry_inputs == GeometryInputs::Full; }

  void validate() const {
    require(blocks > 0 && f > 0 && n > 0, ErrorKind::ConfigInvalid, "blocks, f and n must be positive");
    require(heads > 0 && f % heads == 0, ErrorKind::ConfigInvalid, "heads must divide f");
    require(vit_heads > 0 && vit_dim % vit_heads == 0, ErrorKind::ConfigInvalid, "vit_heads must divide vit_dim");
    require(b == 7, ErrorKind::ConfigInvalid, "the octave target has 7 bands");
    require(depth_height % patch_h == 0 && depth_width % patch_w == 0, ErrorKind::IndivisibleShape,
            "patch size must divide the depth map");
    require(proxy_pe_dim % 2 == 0, ErrorKind::OddDimension, "proxy encoding dimension must be even");
    require(codec_latent_dim > 0, ErrorKind::ConfigInvalid, "codec_latent_dim must be positive");
  }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"attention", c.attention},       {"use_modulation", c.use_modulation},
       {"spectrum_target", c.spectrum_target}, {"geometry_inputs", c.geometry_inputs},
       {"blocks", c.blocks},             {"f", c.f},
       {"heads", c.heads},               {"n", c.n},
       {"b", c.b},                       {"B", c.B},
       {"depth_height", c.depth_height}, {"depth_width", c.depth_width},
       {"patch_h", c.patch_h},           {"patch_w", c.patch_w},
       {"vit_dim", c.vit_dim},           {"vit_layers", c.vit_layers},
       {"vit_heads", c.vit_heads},       {"coord_freqs", c.coord_freqs},
       {"coord_hidden", c.coord_hidden}, {"coord_dim", c.coord_dim},
       {"proxy_pe_dim", c.proxy_pe_dim}, {"codec_latent_dim", c.codec_latent_dim}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  const ModelConfig d;
  auto enum_field = [&](const char* key, auto def) {
    using E = decltype(def);
    return j.contains(key) ? parse_enum<E>(j.at(key).get<std::string>(), key) : def;
  };
  c.attention = enum_field("attention", d.attention);
  c.use_modulation = j.value("use_modulation", d.use_modulation);
  c.spectrum_target = enum_field("spectrum_target", d.spectrum_target);
  c.geometry_inputs = enum_field("geometry_inputs", d.geometry_inputs);
  c.blocks = j.value("blocks", d.blocks);
  c.f = j.value("f", d.f);
  c.heads = j.value("heads", d.heads);
  c.n = j.value("n", d.n);
  c.b = j.value("b", d.b);
  c.B = j.value("B", d.B);
  c.depth_height = j.value("depth_height", d.depth_height);
  c.depth_width = j.value("depth_width", d.depth_width);
  c.patch_h = j.value("patch_h", d.patch_h);
  c.patch_w = j.value("patch_w", d.patch_w);
  c.vit_dim = j.value("vit_dim", d.vit_dim);
  c.vit_layers = j.value("vit_layers", d.vit_layers);
  c.vit_heads = j.value("vit_heads", d.vit_heads);
  c.coord_freqs = j.value("coord_freqs", d.coord_freqs);
  c.coord_hidden = j.value("coord_hidden", d.coord_hidden);
  c.coord_dim = j.value("coord_dim", d.coord_dim);
  c.proxy_pe_dim = j.value("proxy_pe_dim", d.proxy_pe_dim);
  c.codec_latent_dim = j.value("codec_latent_dim", d.codec_latent_dim);
}

}  // namespace eigenet::model
