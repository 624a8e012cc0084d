#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <numbers>
#include <vector>

#include "eigenet/acoustics/rir.hpp"
#include "eigenet/simulator/room.hpp"

namespace eigenet::sim {

struct RirSpec {
  int sample_rate = acoustics::kDefaultSampleRate;
  int length = acoustics::kDefaultRirLength;
};

inline constexpr int kSincTaps = 81;
inline constexpr double kMinDistance = 0.1;
inline constexpr std::uint64_t kDefaultImageBudget = 20'000'000;

/// Number of image sources with reflection order <= max_order.
inline std::uint64_t image_count(int max_order) {
  // Per axis, order o is reached by one (n, q) pair when o = 0 and two otherwise.
  auto per_axis = [](int o) -> std::uint64_t { return o == 0 ? 1 : 2; };
  std::uint64_t total = 0;
  for (int ox = 0; ox <= max_order; ++ox)
    for (int oy = 0; ox + oy <= max_order; ++oy) {
      std::uint64_t z = 1 + 2ULL * static_cast<std::uint64_t>(max_order - ox - oy);
      total += per_axis(ox) * per_axis(oy) * z;
    }
  return total;
}

namespace detail {

/// Deposit one arrival with an 81-tap Hann-windowed sinc fractional delay.
inline void deposit(std::vector<double>& out, double delay, double amplitude) {
  constexpr int half = kSincTaps / 2;
  const double base = std::floor(delay);
  const double frac = delay - base;
  const auto center = static_cast<std::int64_t>(base);
  const auto len = static_cast<std::int64_t>(out.size());
  if (center - half >= len || center + half + 1 < 0) return;
  // sin(πf) = sin(π(1−f)); the smaller argument keeps precision when f is near 1.
  const double sin_frac = std::sin(std::numbers::pi * std::min(frac, 1.0 - frac));
  for (int m = -half; m <= half + 1; ++m) {
    const std::int64_t k = center + m;
    if (k < 0 || k >= len) continue;
    const double x = static_cast<double>(m) - frac;  // k − delay
    if (std::abs(x) >= kSincTaps / 2.0) continue;
    double s;
    if (x == 0.0) {
      s = 1.0;
    } else {
      // sin(π(m − frac)) = −(−1)^m sin(π frac)
      const double sign = (m % 2 == 0) ? -1.0 : 1.0;
      s = sign * sin_frac / (std::numbers::pi * x);
    }
    const double w = 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * x / kSincTaps));
    out[static_cast<std::size_t>(k)] += amplitude * w * s;
  }
}

}  // namespace detail

/// Broadband image-source RIR of a shoebox room. Each image contributes
/// (∏ √(1−α) over its reflections) / max(d, 0.1 m) at delay d/c.
inline acoustics::Rir ism_rir(const Room& room, const Vec3& src, const Vec3& rcv, int max_order,
                              const RirSpec& spec = {},
                              std::uint64_t image_budget = kDefaultImageBudget) {
  require(max_order >= 0, ErrorKind::ConfigInvalid, "max_order must be non-negative");
  require(spec.sample_rate > 0 && spec.length > 0, ErrorKind::ConfigInvalid, "invalid RirSpec");
  require(room.contains(src) && room.contains(rcv), ErrorKind::ConfigInvalid,
          "source and receiver must lie inside the room");
  require((src - rcv).norm() > 0.0, ErrorKind::CoincidentEndpoints, "source equals receiver");
  require(image_count(max_order) <= image_budget, ErrorKind::OrderTooLargeForBudget,
          "image count exceeds budget");

  const double fs = spec.sample_rate;
  const double c = room.speed_of_sound;
  const double max_delay = spec.length + kSincTaps / 2 + 1;
  std::array<double, 6> beta{};
  for (int f = 0; f < 6; ++f) beta[f] = std::sqrt(1.0 - room.wall_absorption[f]);

  struct AxisImage {
    double offset;  // image coordinate minus receiver coordinate
    double gain;
    int order;
  };
  const int nmax = max_order / 2 + 1;
  std::array<std::vector<AxisImage>, 3> axes;
  for (int a = 0; a < 3; ++a) {
    const double L = room.dimensions[a];
    for (int q = 0; q <= 1; ++q)
      for (int n = -nmax; n <= nmax; ++n) {
        const int order = std::abs(2 * n - q);
        if (order > max_order) continue;
        // (1−2q)·s − r is computed before adding 2nL so a source/receiver
        // swap yields bit-identical image distances.
        const double base = (q == 0 ? src[a] : -src[a]) - rcv[a];
        const double offset = base + 2.0 * n * L;
        const double gain = std::pow(beta[2 * a], std::abs(n - q)) * std::pow(beta[2 * a + 1], std::abs(n));
        axes[a].push_back({offset, gain, order});
      }
  }

  std::vector<double> out(static_cast<std::size_t>(spec.length), 0.0);
  for (const auto& ix : axes[0])
    for (const auto& iy : axes[1]) {
      if (ix.order + iy.order > max_order) continue;
      const double dxy = ix.offset * ix.offset + iy.offset * iy.offset;
      if (std::sqrt(dxy) / c * fs > max_delay) continue;
      for (const auto& iz : axes[2]) {
        if (ix.order + iy.order + iz.order > max_order) continue;
        const double d = std::sqrt(dxy + iz.offset * iz.offset);
        const double delay = d / c * fs;
        if (delay > max_delay) continue;
        const double amp = ix.gain * iy.gain * iz.gain / std::max(d, kMinDistance);
        detail::deposit(out, delay, amp);
      }
    }
  return acoustics::Rir(std::move(out), spec.sample_rate);
}

}  // namespace eigenet::sim
