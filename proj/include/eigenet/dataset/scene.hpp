#pragma once

#include <string>
#include <vector>

#include "eigenet/acoustics/rir.hpp"
#include "eigenet/simulator/depth.hpp"
#include "eigenet/simulator/room.hpp"

namespace eigenet::data {

using sim::Vec3;

/// One room with a single receiver. Source poses are stored in the receiver
/// frame (receiver at the origin); `receiver_absolute` re-offsets them.
struct Scene {
  std::string scene_id;
  sim::Room room;
  Vec3 receiver_absolute = Vec3::Zero();
  std::vector<Vec3> sources;
  std::vector<acoustics::Rir> rirs;
  sim::DepthMap depth;

  /// Always the origin in the stored frame; kept per view for the model signature.
  Vec3 receiver() const { return Vec3::Zero(); }
  Vec3 source_absolute(std::size_t i) const { return sources[i] + receiver_absolute; }

  int sample_rate() const { return rirs.empty() ? 0 : rirs.front().sample_rate; }
  int rir_length() const { return rirs.empty() ? 0 : static_cast<int>(rirs.front().size()); }

  void validate() const {
    require(sources.size() == rirs.size(), ErrorKind::ShapeMismatch, "sources and rirs differ in count");
    require(sources.size() >= 9, ErrorKind::TooFewSources, "a scene needs at least 9 sources");
    for (const auto& r : rirs)
      require(r.sample_rate == rirs.front().sample_rate && r.size() == rirs.front().size(),
              ErrorKind::ShapeMismatch, "RIRs must share sample rate and length");
    require(depth.values.size() == static_cast<std::size_t>(depth.height) * depth.width,
            ErrorKind::ShapeMismatch, "depth map size");
  }

  bool operator==(const Scene& o) const {
    return scene_id == o.scene_id && room.dimensions == o.room.dimensions &&
           room.wall_absorption == o.room.wall_absorption && room.speed_of_sound == o.room.speed_of_sound &&
           receiver_absolute == o.receiver_absolute && sources == o.sources && rirs == o.rirs &&
           depth == o.depth;
  }
};

/// A few-shot query: predict `target_index` from `reference_indices`.
struct Example {
  const Scene* scene = nullptr;
  std::vector<std::size_t> reference_indices;
  std::size_t target_index = 0;
};

}  // namespace eigenet::data
