#pragma once

#include <optional>
#include <vector>

#include "eigenet/acoustics/spectra.hpp"
#include "eigenet/codec/codec.hpp"
#include "eigenet/dataset/scene.hpp"
#include "eigenet/model/eigenet.hpp"

namespace eigenet::trainer {

using ad::Mat;
using model::EigeNet;
using model::ModelConfig;
using model::ProbeSpec;

/// Per-scene tensors shared by every example drawn from that scene: the
/// back-projected depth points, frozen-codec latents of every source, and
/// the waveform and spectrum targets.
struct SceneCache {
  const data::Scene* scene = nullptr;
  Mat<double> points;
  std::vector<Mat<double>> latents;
  std::vector<Mat<double>> waveforms;
  std::vector<Mat<double>> spectra;
};

inline Mat<double> spectrum_target(const acoustics::Rir& h, model::SpectrumTarget kind, int frame_rate) {
  switch (kind) {
    case model::SpectrumTarget::Octave7: return acoustics::octave_power_spectrum(h, {}, frame_rate);
    case model::SpectrumTarget::FullStft: return acoustics::full_stft_spectrum(h, frame_rate);
    case model::SpectrumTarget::None: break;
  }
  return {};
}

inline SceneCache build_cache(const data::Scene& scene, const codec::FrozenCodec& codec,
                              model::SpectrumTarget target) {
  scene.validate();
  SceneCache c;
  c.scene = &scene;
  c.points = sim::back_project(scene.depth);
  const int frame_rate = codec.arch().config().frame_rate;
  for (const auto& h : scene.rirs) {
    c.latents.push_back(codec.encode(h).cast<double>());
    c.waveforms.push_back(Eigen::Map<const Mat<double>>(h.samples.data(), 1, static_cast<Eigen::Index>(h.size())));
    if (target != model::SpectrumTarget::None) c.spectra.push_back(spectrum_target(h, target, frame_rate));
  }
  return c;
}

inline std::vector<SceneCache> build_caches(const std::vector<data::Scene>& scenes, const codec::FrozenCodec& codec,
                                            model::SpectrumTarget target) {
  std::vector<SceneCache> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) out.push_back(build_cache(s, codec, target));
  return out;
}

// Caches point into the scenes, so temporaries are rejected.
std::vector<SceneCache> build_caches(std::vector<data::Scene>&&, const codec::FrozenCodec&, model::SpectrumTarget) = delete;
SceneCache build_cache(data::Scene&&, const codec::FrozenCodec&, model::SpectrumTarget) = delete;

/// Runs the model on one example. Latents and points are cast to T here so
/// the cache can serve both float training and double gradient checks.
template <typename T>
model::Prediction<T> predict(const EigeNet& net, const nn::ParamStore<T>& ps, const model::DecoderRef<T>& decoder,
                             const SceneCache& cache, const data::Example& ex,
                             const std::optional<ProbeSpec>& probe = std::nullopt) {
  const auto& scene = *cache.scene;
  std::vector<sim::Vec3> tx{scene.sources[ex.target_index]};
  std::vector<sim::Vec3> rx{scene.receiver()};
  std::vector<Mat<T>> lat;
  lat.reserve(ex.reference_indices.size());
  for (auto i : ex.reference_indices) {
    tx.push_back(scene.sources[i]);
    rx.push_back(scene.receiver());
    lat.push_back(cache.latents[i].template cast<T>());
  }
  std::vector<const Mat<T>*> ptrs;
  for (const auto& l : lat) ptrs.push_back(&l);
  const Mat<T> pts = cache.points.template cast<T>();
  return net.forward(ps, decoder, pts, scene.depth.height, scene.depth.width, tx, rx, ptrs, probe);
}

/// Prediction as a plain waveform.
template <typename T>
acoustics::Rir predict_rir(const EigeNet& net, const nn::ParamStore<T>& ps, const model::DecoderRef<T>& decoder,
                           const SceneCache& cache, const data::Example& ex,
                           const std::optional<ProbeSpec>& probe = std::nullopt) {
  const auto y = predict(net, ps, decoder, cache, ex, probe).rir.value();
  std::vector<double> s(static_cast<std::size_t>(y.cols()));
  for (Eigen::Index i = 0; i < y.cols(); ++i) s[static_cast<std::size_t>(i)] = static_cast<double>(y(0, i));
  return acoustics::Rir(std::move(s), cache.scene->sample_rate());
}

}  // namespace eigenet::trainer
