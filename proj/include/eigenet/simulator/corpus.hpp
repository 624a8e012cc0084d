#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "json.hpp"

#include "eigenet/dataset/io.hpp"
#include "eigenet/dataset/sampling.hpp"
#include "eigenet/simulator/scene_sampler.hpp"

namespace eigenet::sim {

namespace fs = std::filesystem;

/// Seed of the i-th scene of a corpus.
inline std::uint64_t corpus_scene_seed(std::uint64_t corpus_seed, std::size_t index) {
  return Rng(corpus_seed).split("corpus").split(static_cast<std::uint64_t>(index)).next_u64() >> 16;
}

struct CorpusConfig {
  int scenes = 50;
  std::uint64_t seed = 0;
  double train_ratio = 0.8;
  SceneSamplerConfig sampler{};
};

inline void to_json(nlohmann::json& j, const CorpusConfig& c) {
  j = {{"scenes", c.scenes}, {"seed", c.seed}, {"train_ratio", c.train_ratio}, {"sampler", c.sampler}};
}
inline void from_json(const nlohmann::json& j, CorpusConfig& c) {
  const CorpusConfig d;
  c.scenes = j.value("scenes", d.scenes);
  c.seed = j.value("seed", d.seed);
  c.train_ratio = j.value("train_ratio", d.train_ratio);
  c.sampler = j.value("sampler", d.sampler);
}

/// Simulates and writes a corpus: `scenes/<id>/` per scene plus
/// `corpus.json` with ids, scene-level splits and the generation config.
/// Output is identical for any thread count.
inline nlohmann::json simulate_corpus(const CorpusConfig& cfg, const fs::path& out, int threads = 1,
                                      const std::function<void(const std::string&)>& progress = {}) {
  require(cfg.scenes > 0, ErrorKind::ConfigInvalid, "scene count must be positive");
  std::vector<std::string> ids(static_cast<std::size_t>(cfg.scenes));
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr error;
  auto worker = [&] {
    for (std::size_t i = next++; i < ids.size(); i = next++) {
      try {
        const auto scene = sample_scene(corpus_scene_seed(cfg.seed, i), cfg.sampler);
        data::write_scene(scene, out / "scenes" / scene.scene_id);
        std::lock_guard lock(mu);
        ids[i] = scene.scene_id;
        if (progress) progress("simulated " + scene.scene_id);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        next = ids.size();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < std::max(threads, 1); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);

  const auto [train, test] = data::make_splits(ids, cfg.train_ratio, cfg.seed);
  nlohmann::json index = {{"format_version", data::kSceneFormatVersion},
                          {"scene_ids", ids},
                          {"splits", {{"train", train}, {"test", test}}},
                          {"generation", cfg}};
  std::ofstream(out / "corpus.json") << index.dump(2) << '\n';
  return index;
}

}  // namespace eigenet::sim
