#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "eigenet/simulator/room.hpp"

namespace eigenet::sim {

/// Equirectangular panorama of ray distances, stored row-major H × W.
struct DepthMap {
  int height = 0;
  int width = 0;
  std::vector<float> values;

  float at(int u, int v) const { return values[static_cast<std::size_t>(u) * width + v]; }
  bool operator==(const DepthMap&) const = default;
};

/// Unit direction of pixel (u, v): azimuth θ = 2π(v+½)/W − π about +z,
/// elevation φ = π/2 − π(u+½)/H.
inline Vec3 panorama_direction(int u, int v, int height, int width) {
  const double theta = 2.0 * std::numbers::pi * (v + 0.5) / width - std::numbers::pi;
  const double phi = std::numbers::pi / 2.0 - std::numbers::pi * (u + 0.5) / height;
  return {std::cos(phi) * std::cos(theta), std::cos(phi) * std::sin(theta), std::sin(phi)};
}

/// Distance from an interior point to the first wall along a unit direction.
inline double ray_distance(const Room& room, const Vec3& origin, const Vec3& dir) {
  double best = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (dir[a] == 0.0) continue;
    const double wall = dir[a] > 0.0 ? room.dimensions[a] : 0.0;
    best = std::min(best, (wall - origin[a]) / dir[a]);
  }
  return best;
}

inline DepthMap render_panoramic_depth(const Room& room, const Vec3& rcv, int height, int width) {
  require(height > 0 && width > 0, ErrorKind::ConfigInvalid, "depth resolution must be positive");
  DepthMap map{height, width, std::vector<float>(static_cast<std::size_t>(height) * width)};
  for (int u = 0; u < height; ++u)
    for (int v = 0; v < width; ++v)
      map.values[static_cast<std::size_t>(u) * width + v] =
          static_cast<float>(ray_distance(room, rcv, panorama_direction(u, v, height, width)));
  return map;
}

/// Inverse of the renderer: receiver-frame 3-D point of every pixel, 3 × (H·W).
inline Eigen::Matrix<double, 3, Eigen::Dynamic> back_project(const DepthMap& depth) {
  Eigen::Matrix<double, 3, Eigen::Dynamic> pts(3, static_cast<Eigen::Index>(depth.values.size()));
  for (int u = 0; u < depth.height; ++u)
    for (int v = 0; v < depth.width; ++v) {
      const auto idx = static_cast<Eigen::Index>(u) * depth.width + v;
      pts.col(idx) = panorama_direction(u, v, depth.height, depth.width) * static_cast<double>(depth.at(u, v));
    }
  return pts;
}

}  // namespace eigenet::sim
