#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "eigenet/core/rng.hpp"
#include "eigenet/dataset/scene.hpp"

namespace eigenet::data {

/// Scene-level split, so every test room is unseen during training.
inline std::pair<std::vector<std::string>, std::vector<std::string>> make_splits(
    std::vector<std::string> scene_ids, double ratio, std::uint64_t seed) {
  require(!scene_ids.empty(), ErrorKind::EmptyInput, "no scenes to split");
  require(ratio > 0.0 && ratio < 1.0, ErrorKind::ConfigInvalid, "split ratio must lie in (0, 1)");
  Rng rng = Rng(seed).split("splits");
  for (std::size_t i = scene_ids.size(); i > 1; --i) std::swap(scene_ids[i - 1], scene_ids[rng.below(i)]);
  auto n_train = static_cast<std::size_t>(std::lround(ratio * static_cast<double>(scene_ids.size())));
  // Keep both splits non-empty whenever there are two or more scenes.
  if (scene_ids.size() >= 2) n_train = std::clamp<std::size_t>(n_train, 1, scene_ids.size() - 1);
  std::vector<std::string> train(scene_ids.begin(), scene_ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::string> test(scene_ids.begin() + static_cast<std::ptrdiff_t>(n_train), scene_ids.end());
  return {std::move(train), std::move(test)};
}

/// K distinct references for a fixed target, drawn without replacement.
inline Example sample_references(const Scene& scene, std::size_t target, std::size_t k, Rng& rng) {
  const std::size_t m = scene.sources.size();
  require(target < m, ErrorKind::ConfigInvalid, "target index out of range");
  require(m >= k + 1, ErrorKind::TooFewSources,
          "scene has " + std::to_string(m) + " sources, need " + std::to_string(k + 1));
  Example ex;
  ex.scene = &scene;
  ex.target_index = target;
  std::vector<std::size_t> pool;
  pool.reserve(m - 1);
  for (std::size_t i = 0; i < m; ++i)
    if (i != target) pool.push_back(i);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
    ex.reference_indices.push_back(pool[i]);
  }
  return ex;
}

/// Uniform target, then K distinct references from the remaining sources.
inline Example sample_example(const Scene& scene, std::size_t k, Rng& rng) {
  const std::size_t m = scene.sources.size();
  require(m >= k + 1, ErrorKind::TooFewSources,
          "scene has " + std::to_string(m) + " sources, need " + std::to_string(k + 1));
  const std::size_t target = rng.below(m);
  return sample_references(scene, target, k, rng);
}

}  // namespace eigenet::data
