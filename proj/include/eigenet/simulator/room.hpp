#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>

#include "eigenet/core/error.hpp"

namespace eigenet::sim {

using Vec3 = Eigen::Vector3d;

inline constexpr double kDefaultSpeedOfSound = 343.0;
inline constexpr double kWallClearance = 0.3;

/// Faces are ordered x=0, x=Lx, y=0, y=Ly, z=0, z=Lz.
struct Room {
  Vec3 dimensions{5.0, 4.0, 3.0};
  std::array<double, 6> wall_absorption{0.3, 0.3, 0.3, 0.3, 0.3, 0.3};
  double speed_of_sound = kDefaultSpeedOfSound;

  double volume() const { return dimensions.prod(); }
  double surface_area() const {
    const auto& L = dimensions;
    return 2.0 * (L.x() * L.y() + L.y() * L.z() + L.x() * L.z());
  }
  double face_area(int face) const {
    const auto& L = dimensions;
    switch (face / 2) {
      case 0: return L.y() * L.z();
      case 1: return L.x() * L.z();
      default: return L.x() * L.y();
    }
  }
  /// Area-weighted mean absorption.
  double mean_absorption() const {
    double acc = 0.0;
    for (int f = 0; f < 6; ++f) acc += wall_absorption[f] * face_area(f);
    return acc / surface_area();
  }

  bool contains(const Vec3& p, double clearance = 0.0) const {
    for (int a = 0; a < 3; ++a)
      if (!(p[a] > clearance && p[a] < dimensions[a] - clearance)) return false;
    return true;
  }

  void validate() const {
    for (int a = 0; a < 3; ++a)
      require(dimensions[a] >= 2.0 && dimensions[a] <= 12.0, ErrorKind::ConfigInvalid,
              "room dimensions must lie in [2, 12] m");
    for (double a : wall_absorption)
      require(a > 0.0 && a <= 1.0, ErrorKind::ConfigInvalid, "absorption must lie in (0, 1]");
    require(speed_of_sound > 0.0, ErrorKind::ConfigInvalid, "speed of sound must be positive");
  }

  static Room uniform(const Vec3& dims, double alpha, double c = kDefaultSpeedOfSound) {
    Room r;
    r.dimensions = dims;
    r.wall_absorption.fill(alpha);
    r.speed_of_sound = c;
    return r;
  }
};

/// Sabine reverberation time, 24·ln(10)/c · V/(ᾱ·S).
inline double sabine_t60(const Room& room) {
  const double alpha = room.mean_absorption();
  require(alpha > 0.0, ErrorKind::ZeroAbsorption, "mean absorption is zero");
  return 24.0 * std::log(10.0) / room.speed_of_sound * room.volume() / (alpha * room.surface_area());
}

}  // namespace eigenet::sim
