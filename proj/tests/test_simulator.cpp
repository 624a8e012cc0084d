#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <limits>

#include "eigenet/acoustics/metrics.hpp"
#include "eigenet/core/rng.hpp"
#include "eigenet/simulator/depth.hpp"
#include "eigenet/simulator/ism.hpp"
#include "eigenet/simulator/room.hpp"
#include "eigenet/simulator/scene_sampler.hpp"

using namespace eigenet;
using namespace eigenet::sim;

namespace {

template <typename F>
void expect_error(ErrorKind kind, F&& f) {
  try {
    f();
    ADD_FAILURE() << "expected " << to_string(kind);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

Vec3 random_inside(Rng& rng, const Room& room) {
  return {rng.uniform(0.3, room.dimensions.x() - 0.3), rng.uniform(0.3, room.dimensions.y() - 0.3),
          rng.uniform(0.3, room.dimensions.z() - 0.3)};
}

Room random_room(Rng& rng) {
  Room r;
  r.dimensions = {rng.uniform(2.5, 9.0), rng.uniform(2.5, 9.0), rng.uniform(2.5, 4.0)};
  for (auto& a : r.wall_absorption) a = rng.uniform(0.1, 0.6);
  return r;
}

/// Brute force: intersect the ray with all six planes and keep the nearest
/// hit that lies on the room boundary.
double six_plane_oracle(const Room& room, const Vec3& o, const Vec3& d) {
  double best = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a)
    for (double wall : {0.0, room.dimensions[a]}) {
      if (d[a] == 0.0) continue;
      const double t = (wall - o[a]) / d[a];
      if (t <= 0.0) continue;
      const Vec3 p = o + t * d;
      bool inside = true;
      for (int b = 0; b < 3; ++b)
        if (b != a && (p[b] < -1e-9 || p[b] > room.dimensions[b] + 1e-9)) inside = false;
      if (inside) best = std::min(best, t);
    }
  return best;
}

}  // namespace

// ---------------------------------------------------------------- ISM

TEST(Ism, DirectPathOnly) {
  const auto room = Room::uniform({10, 10, 10}, 0.3);
  const auto h = ism_rir(room, {2.0, 5.0, 5.0}, {5.43, 5.0, 5.0}, 0);
  const auto peak = std::max_element(h.samples.begin(), h.samples.end()) - h.samples.begin();
  EXPECT_EQ(peak, 160);
  EXPECT_NEAR(h.samples[160], 1.0 / 3.43, 1e-9);
  EXPECT_NEAR(h.samples[150], 0.0, 1e-9);
  EXPECT_NEAR(h.samples[170], 0.0, 1e-9);
}

TEST(Ism, ReciprocityOnRandomRooms) {
  Rng rng(17);
  for (int trial = 0; trial < 8; ++trial) {
    const Room room = random_room(rng);
    const Vec3 a = random_inside(rng, room), b = random_inside(rng, room);
    const int order = static_cast<int>(rng.below(21));
    const auto ab = ism_rir(room, a, b, order), ba = ism_rir(room, b, a, order);
    for (std::size_t i = 0; i < ab.size(); ++i) ASSERT_NEAR(ab.samples[i], ba.samples[i], 1e-12) << "order " << order;
  }
}

TEST(Ism, Errors) {
  const auto room = Room::uniform({5, 4, 3}, 0.3);
  expect_error(ErrorKind::CoincidentEndpoints, [&] { ism_rir(room, {1, 1, 1}, {1, 1, 1}, 2); });
  expect_error(ErrorKind::OrderTooLargeForBudget, [&] { ism_rir(room, {1, 1, 1}, {2, 2, 2}, 500); });
  expect_error(ErrorKind::ConfigInvalid, [&] { ism_rir(room, {1, 1, 1}, {2, 2, 2}, -1); });
}

TEST(Ism, ImageCountMatchesEnumeration) {
  for (int order : {0, 1, 3, 7}) {
    std::uint64_t count = 0;
    for (int x = -order; x <= order; ++x)
      for (int y = -order; y <= order; ++y)
        for (int z = -order; z <= order; ++z)
          if (std::abs(x) + std::abs(y) + std::abs(z) <= order) count += 1;
    // Each lattice index with reflection count |i| corresponds to one image per axis.
    EXPECT_EQ(image_count(order), count) << order;
  }
}

TEST(Ism, SabineExampleRoom) {
  const auto room = Room::uniform({5, 4, 3}, 0.3);
  const auto h = ism_rir(room, {1.3, 1.1, 1.2}, {3.4, 2.6, 1.7}, 40);
  const double t60 = acoustics::decay_time(h, acoustics::DecayKind::T60_via_T20);
  EXPECT_NEAR(t60 / sabine_t60(room), 1.0, 0.30);
}

TEST(Ism, MoreAbsorptionShortensDecay) {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Room room = random_room(rng);
    const double alpha = rng.uniform(0.15, 0.4);
    room.wall_absorption.fill(alpha);
    const Vec3 s = random_inside(rng, room), r = random_inside(rng, room);
    Room damper = room;
    damper.wall_absorption.fill(alpha + 0.1);
    const double t_lo = acoustics::decay_time(ism_rir(room, s, r, 60), acoustics::DecayKind::T60_via_T20);
    const double t_hi = acoustics::decay_time(ism_rir(damper, s, r, 60), acoustics::DecayKind::T60_via_T20);
    EXPECT_LT(t_hi, t_lo) << "trial " << trial;
  }
}

// ---------------------------------------------------------------- Sabine

TEST(Sabine, HandComputedValues) {
  EXPECT_NEAR(sabine_t60(Room::uniform({5, 5, 5}, 0.2)), 0.6708, 1e-3);
  EXPECT_NEAR(sabine_t60(Room::uniform({3, 3, 3}, 1.0)), 0.0805, 1e-4);
}

TEST(Sabine, DoublingAbsorptionHalves) {
  const Room a = Room::uniform({6, 4, 3}, 0.2), b = Room::uniform({6, 4, 3}, 0.4);
  EXPECT_NEAR(sabine_t60(a) / sabine_t60(b), 2.0, 1e-14);
}

TEST(Sabine, ZeroAbsorption) {
  Room r;
  r.wall_absorption.fill(0.0);
  expect_error(ErrorKind::ZeroAbsorption, [&] { sabine_t60(r); });
}

TEST(Room, ValidateRanges) {
  EXPECT_NO_THROW(Room::uniform({2, 12, 3}, 1.0).validate());
  expect_error(ErrorKind::ConfigInvalid, [] { Room::uniform({1.5, 4, 3}, 0.3).validate(); });
  expect_error(ErrorKind::ConfigInvalid, [] { Room::uniform({5, 4, 3}, 0.0).validate(); });
}

// ---------------------------------------------------------------- depth

TEST(Depth, CentreOfCubeAlongX) {
  const auto room = Room::uniform({2, 2, 2}, 0.3);
  const Vec3 dir = panorama_direction(1, 2, 3, 5);
  EXPECT_NEAR(dir.x(), 1.0, 1e-12);
  const auto map = render_panoramic_depth(room, {1, 1, 1}, 3, 5);
  EXPECT_NEAR(map.at(1, 2), 1.0, 1e-6);
  EXPECT_NEAR(ray_distance(room, {1, 1, 1}, {1, 0, 0}), 1.0, 1e-15);
}

TEST(Depth, ValuesWithinBoundingGeometry) {
  Rng rng(3);
  const Room room = random_room(rng);
  const Vec3 rcv = random_inside(rng, room);
  const auto map = render_panoramic_depth(room, rcv, 64, 128);
  double far = 0;
  for (int c = 0; c < 8; ++c) {
    const Vec3 corner((c & 1) * room.dimensions.x(), ((c >> 1) & 1) * room.dimensions.y(),
                      ((c >> 2) & 1) * room.dimensions.z());
    far = std::max(far, (corner - rcv).norm());
  }
  for (float v : map.values) {
    ASSERT_GE(v, 0.3f - 1e-6f);
    ASSERT_LE(v, far + 1e-5);
  }
}

TEST(Depth, RayCastMatchesSixPlaneOracle) {
  Rng rng(99);
  const Room room = random_room(rng);
  const Vec3 rcv = random_inside(rng, room);
  const int H = 64, W = 128;
  const auto map = render_panoramic_depth(room, rcv, H, W);
  for (int i = 0; i < 1000; ++i) {
    const int u = static_cast<int>(rng.below(H)), v = static_cast<int>(rng.below(W));
    const Vec3 d = panorama_direction(u, v, H, W);
    const double oracle = six_plane_oracle(room, rcv, d);
    ASSERT_NEAR(ray_distance(room, rcv, d), oracle, 1e-9);
    // The stored map holds the float32 rounding of the exact distance.
    ASSERT_EQ(map.at(u, v), static_cast<float>(oracle));
  }
}

TEST(Depth, BackProjectionLandsOnWalls) {
  Rng rng(4);
  const Room room = random_room(rng);
  const Vec3 rcv = random_inside(rng, room);
  const auto map = render_panoramic_depth(room, rcv, 32, 64);
  const auto pts = back_project(map);
  ASSERT_EQ(pts.cols(), 32 * 64);
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    const Vec3 p = pts.col(i) + rcv;
    double gap = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) gap = std::min({gap, std::abs(p[a]), std::abs(p[a] - room.dimensions[a])});
    ASSERT_LE(gap, 1e-6);
  }
}

// ---------------------------------------------------------------- scenes

TEST(SceneSampler, DeterministicInSeed) {
  SceneSamplerConfig cfg;
  cfg.max_order = 10;
  const auto a = sample_scene(42, cfg), b = sample_scene(42, cfg), c = sample_scene(43, cfg);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == c);
  EXPECT_EQ(a.scene_id, "scene_42");
}

TEST(SceneSampler, ClearanceAndReceiverFrame) {
  SceneSamplerConfig cfg;
  cfg.max_order = 5;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto s = sample_scene(seed, cfg);
    EXPECT_NO_THROW(s.validate());
    EXPECT_EQ(static_cast<int>(s.sources.size()), cfg.num_sources);
    EXPECT_TRUE(s.room.contains(s.receiver_absolute, 0.3 - 1e-12));
    EXPECT_EQ(s.receiver(), Vec3::Zero());
    for (std::size_t i = 0; i < s.sources.size(); ++i) {
      const Vec3 abs = s.source_absolute(i);
      EXPECT_TRUE(s.room.contains(abs, 0.3 - 1e-12));
      EXPECT_GE(s.sources[i].norm(), cfg.min_source_distance);
      EXPECT_EQ(abs - s.receiver_absolute, s.sources[i]);
    }
  }
}

TEST(SceneSampler, ConfigErrors) {
  SceneSamplerConfig cfg;
  cfg.num_sources = 5;
  expect_error(ErrorKind::ConfigInvalid, [&] { sample_scene(1, cfg); });
  cfg = {};
  cfg.min_source_distance = 100.0;
  cfg.max_attempts = 50;
  expect_error(ErrorKind::SamplingExhausted, [&] { sample_scene(1, cfg); });
}

TEST(SceneSampler, DefaultConfigTimeBudget) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto s = sample_scene(7);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_EQ(s.rirs.size(), 20u);
  EXPECT_LT(secs, 10.0);
}
