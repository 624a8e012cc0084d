#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "json.hpp"

#include "eigenet/core/rng.hpp"
#include "eigenet/dataset/scene.hpp"
#include "eigenet/simulator/depth.hpp"
#include "eigenet/simulator/ism.hpp"

namespace eigenet::sim {

struct SceneSamplerConfig {
  int num_sources = 20;
  int max_order = 30;
  Vec3 min_dimensions{3.0, 3.0, 2.5};
  Vec3 max_dimensions{8.0, 8.0, 4.0};
  double min_absorption = 0.15;
  double max_absorption = 0.5;
  double clearance = kWallClearance;
  double min_source_distance = 0.5;
  int depth_height = 64;
  int depth_width = 128;
  RirSpec rir{};
  int max_attempts = 1000;

  void validate() const {
    require(num_sources >= 9, ErrorKind::ConfigInvalid, "need at least 9 sources (8 references + target)");
    require(max_order >= 0, ErrorKind::ConfigInvalid, "max_order must be non-negative");
    for (int a = 0; a < 3; ++a)
      require(min_dimensions[a] >= 2.0 && max_dimensions[a] <= 12.0 && min_dimensions[a] <= max_dimensions[a],
              ErrorKind::ConfigInvalid, "dimension range must lie in [2, 12] m");
    require(min_absorption > 0.0 && max_absorption <= 1.0 && min_absorption <= max_absorption,
            ErrorKind::ConfigInvalid, "absorption range must lie in (0, 1]");
    require(depth_height > 0 && depth_width > 0, ErrorKind::ConfigInvalid, "depth resolution");
  }
};

inline void to_json(nlohmann::json& j, const SceneSamplerConfig& c) {
  j = {{"num_sources", c.num_sources},
       {"max_order", c.max_order},
       {"min_dimensions", {c.min_dimensions.x(), c.min_dimensions.y(), c.min_dimensions.z()}},
       {"max_dimensions", {c.max_dimensions.x(), c.max_dimensions.y(), c.max_dimensions.z()}},
       {"min_absorption", c.min_absorption},
       {"max_absorption", c.max_absorption},
       {"clearance", c.clearance},
       {"min_source_distance", c.min_source_distance},
       {"depth_height", c.depth_height},
       {"depth_width", c.depth_width},
       {"sample_rate", c.rir.sample_rate},
       {"rir_length", c.rir.length},
       {"max_attempts", c.max_attempts}};
}

inline void from_json(const nlohmann::json& j, SceneSamplerConfig& c) {
  SceneSamplerConfig d;
  c.num_sources = j.value("num_sources", d.num_sources);
  c.max_order = j.value("max_order", d.max_order);
  if (j.contains("min_dimensions")) {
    auto v = j.at("min_dimensions").get<std::vector<double>>();
    c.min_dimensions = {v.at(0), v.at(1), v.at(2)};
  }
  if (j.contains("max_dimensions")) {
    auto v = j.at("max_dimensions").get<std::vector<double>>();
    c.max_dimensions = {v.at(0), v.at(1), v.at(2)};
  }
  c.min_absorption = j.value("min_absorption", d.min_absorption);
  c.max_absorption = j.value("max_absorption", d.max_absorption);
  c.clearance = j.value("clearance", d.clearance);
  c.min_source_distance = j.value("min_source_distance", d.min_source_distance);
  c.depth_height = j.value("depth_height", d.depth_height);
  c.depth_width = j.value("depth_width", d.depth_width);
  c.rir.sample_rate = j.value("sample_rate", d.rir.sample_rate);
  c.rir.length = j.value("rir_length", d.rir.length);
  c.max_attempts = j.value("max_attempts", d.max_attempts);
}

/// Positions are snapped to multiples of 2^-10 m so receiver-frame offsets
/// and their re-offset back to the room frame are exact in binary floating point.
inline constexpr double kPositionQuantum = 1.0 / 1024.0;

inline double quantize_position(double x) { return std::round(x / kPositionQuantum) * kPositionQuantum; }

namespace detail {

inline Vec3 sample_pose(Rng& rng, const Room& room, double clearance) {
  Vec3 p;
  for (int a = 0; a < 3; ++a)
    p[a] = quantize_position(rng.uniform(clearance, room.dimensions[a] - clearance));
  return p;
}

inline bool clear_of_walls(const Room& room, const Vec3& p, double clearance) {
  for (int a = 0; a < 3; ++a)
    if (p[a] < clearance || p[a] > room.dimensions[a] - clearance) return false;
  return true;
}

}  // namespace detail

/// Deterministic synthetic scene for a seed. RIR samples are rounded to
/// float32 so the scene round-trips bit-exactly through the on-disk format.
inline data::Scene sample_scene(std::uint64_t seed, const SceneSamplerConfig& cfg = {}) {
  cfg.validate();
  Rng rng = Rng(seed).split("scene");
  Rng geo = rng.split("geometry");

  Room room;
  for (int a = 0; a < 3; ++a)
    room.dimensions[a] = quantize_position(geo.uniform(cfg.min_dimensions[a], cfg.max_dimensions[a]));
  for (auto& alpha : room.wall_absorption) alpha = geo.uniform(cfg.min_absorption, cfg.max_absorption);
  room.validate();

  Rng poses = rng.split("poses");
  const double clearance = std::max(cfg.clearance, kWallClearance);
  Vec3 receiver = detail::sample_pose(poses, room, clearance);
  require(detail::clear_of_walls(room, receiver, clearance), ErrorKind::SamplingExhausted,
          "receiver clearance cannot be met");

  data::Scene scene;
  scene.scene_id = "scene_" + std::to_string(seed);
  scene.room = room;
  scene.receiver_absolute = receiver;

  int attempts = 0;
  while (static_cast<int>(scene.sources.size()) < cfg.num_sources) {
    require(attempts++ < cfg.max_attempts, ErrorKind::SamplingExhausted,
            "could not place all sources within the attempt budget");
    const Vec3 p = detail::sample_pose(poses, room, clearance);
    if (!detail::clear_of_walls(room, p, clearance)) continue;
    if ((p - receiver).norm() < cfg.min_source_distance) continue;
    scene.sources.push_back(p - receiver);
  }

  for (const Vec3& rel : scene.sources) {
    auto rir = ism_rir(room, rel + receiver, receiver, cfg.max_order, cfg.rir);
    for (double& s : rir.samples) s = static_cast<double>(static_cast<float>(s));
    scene.rirs.push_back(std::move(rir));
  }
  scene.depth = render_panoramic_depth(room, receiver, cfg.depth_height, cfg.depth_width);
  return scene;
}

}  // namespace eigenet::sim
