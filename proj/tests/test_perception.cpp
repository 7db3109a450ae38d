#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "swarm/perception.hpp"
#include "swarm/spatial_grid.hpp"

using namespace swarm;

namespace {

constexpr float kPi = std::numbers::pi_v<float>;
const WorldSpec kWorld{100.0f, 100.0f};
const std::vector<int> kOneChannel{0};

ViewBuffer views_of(const AgentStore& s, const ViewConfig& cfg, const std::vector<int>& ch = kOneChannel,
                    int workers = 1) {
  auto g = build_grid(s, s.world(), cfg.query_radius());
  return compute_views(s, g, cfg, ch, workers);
}

}  // namespace

TEST(ViewConfig, Validation) {
  EXPECT_NO_THROW(ViewConfig{}.validate());
  EXPECT_THROW((ViewConfig{.v = 0}.validate()), ConfigError);
  EXPECT_THROW((ViewConfig{.fov = 7.0f}.validate()), ConfigError);
  EXPECT_THROW((ViewConfig{.d_v = 0.0f}.validate()), ConfigError);
  EXPECT_THROW((ViewConfig{.channels = 0}.validate()), ConfigError);
  EXPECT_THROW((ViewConfig{.d_r = 0.0f}.validate()), ConfigError);
}

TEST(SectorDirections, ClosedForm) {
  const auto one = sector_directions(0.0f, ViewConfig{.v = 1, .fov = kPi});
  EXPECT_NEAR(one[0].x, 1.0f, 1e-7);
  EXPECT_NEAR(one[0].y, 0.0f, 1e-7);

  const auto two = sector_directions(0.0f, ViewConfig{.v = 2, .fov = kPi});
  EXPECT_NEAR(std::atan2(two[0].y, two[0].x), -kPi / 4, 1e-6);
  EXPECT_NEAR(std::atan2(two[1].y, two[1].x), kPi / 4, 1e-6);

  const ViewConfig cfg{.v = 128};
  const double deg = std::numbers::pi / 180.0;
  const double a0 = (-125.0 + 125.0 / 128.0) * deg;
  EXPECT_NEAR(sector_angle(0.0f, cfg, 0), a0, 1e-6);
  EXPECT_NEAR(sector_angle(0.0f, cfg, 127), -a0, 1e-6);
  const auto dirs = sector_directions(0.0f, cfg);
  EXPECT_NEAR(dirs[0].x, std::cos(a0), 1e-6);
  EXPECT_NEAR(dirs[127].y, -std::sin(a0), 1e-6);
}

TEST(RayDisc, HitMissInside) {
  EXPECT_FLOAT_EQ(*ray_disc_distance(Vec2{0, 0}, Vec2{1, 0}, Vec2{5, 0}, 1.0f), 4.0f);
  EXPECT_FALSE(ray_disc_distance(Vec2{0, 0}, Vec2{1, 0}, Vec2{0, 5}, 1.0f));
  EXPECT_FALSE(ray_disc_distance(Vec2{0, 0}, Vec2{1, 0}, Vec2{-5, 0}, 1.0f));
  EXPECT_EQ(*ray_disc_distance(Vec2{0, 0}, Vec2{1, 0}, Vec2{0.5f, 0}, 1.0f), 0.0f);
}

TEST(RayDisc, MatchesBisectionOracle) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-10, 10), ua(0, 2 * std::numbers::pi), ur(0.1, 2.0);
  int hits = 0;
  for (int k = 0; k < 2000; ++k) {
    const double ox = u(rng), oy = u(rng), cx = u(rng), cy = u(rng), r = ur(rng), a = ua(rng);
    const double dx = std::cos(a), dy = std::sin(a);
    const auto got = ray_disc_distance(BasicVec2<double>{ox, oy}, BasicVec2<double>{dx, dy},
                                       BasicVec2<double>{cx, cy}, r);
    const auto ref = oracle::bisection_ray(ox, oy, dx, dy, cx, cy, r, 60.0);
    ASSERT_EQ(got.has_value(), ref.has_value()) << k;
    if (got) {
      EXPECT_NEAR(*got, *ref, 1e-5);
      ++hits;
    }
  }
  EXPECT_GT(hits, 100);
}

TEST(ComputeViews, IsolatedAgentSeesNothing) {
  AgentStore s(1, kWorld);
  s.set_agent(0, {50, 50}, 1.0f, 0.0f);
  const auto v = views_of(s, ViewConfig{});
  EXPECT_TRUE(std::all_of(v.values().begin(), v.values().end(), [](float x) { return x == 1.0f; }));
}

TEST(ComputeViews, NeighbourDeadAhead) {
  // odd v: sector 4 looks straight along the heading
  const ViewConfig cfg{.v = 9};
  AgentStore s(2, kWorld);
  s.set_agent(0, {50, 50}, 0.0f, 0.0f);
  s.set_agent(1, {55, 50}, 0.0f, 0.0f);
  const auto v = views_of(s, cfg);
  EXPECT_NEAR(v(0, 0, 4), (5.0f - cfg.d_r) / cfg.d_v, 1e-6);
  EXPECT_LT(v(0, 0, 4), 5.0f / cfg.d_v);
  for (int k = 0; k < cfg.v; ++k)
    if (k != 4) EXPECT_EQ(v(0, 0, k), 1.0f) << k;
  // agent 1 faces away: the neighbour is in its blind spot
  for (int k = 0; k < cfg.v; ++k) EXPECT_EQ(v(1, 0, k), 1.0f);
}

TEST(ComputeViews, BruteForceOracleExact) {
  std::mt19937_64 rng(17);
  for (int v : {8, 64, 128}) {
    const ViewConfig cfg{.v = v};
    AgentStore s = oracle::random_store(200, WorldSpec{40.0f, 40.0f}, rng);
    const auto got = views_of(s, cfg, kOneChannel, 3);
    const auto ref = oracle::views(s, cfg, kOneChannel);
    ASSERT_EQ(got.values().size(), ref.size());
    EXPECT_TRUE(std::equal(ref.begin(), ref.end(), got.values().begin())) << "v=" << v;
  }
}

TEST(ComputeViews, OverlappingAgentsReadZero) {
  const ViewConfig cfg{.v = 16, .fov = 2 * kPi};
  AgentStore s(2, kWorld);
  s.set_agent(0, {10, 10}, 0.0f, 0.0f);
  s.set_agent(1, {10.1f, 10}, 0.0f, 0.0f);
  const auto v = views_of(s, cfg);
  const auto ref = oracle::views(s, cfg, kOneChannel);
  EXPECT_TRUE(std::equal(ref.begin(), ref.end(), v.values().begin()));
  EXPECT_EQ(*std::min_element(v.values().begin(), v.values().end()), 0.0f);
}

TEST(ComputeViews, NormalisedRange) {
  std::mt19937_64 rng(19);
  AgentStore s = oracle::random_store(500, WorldSpec{30.0f, 30.0f}, rng);
  const auto v = views_of(s, ViewConfig{.v = 32});
  for (float x : v.values()) {
    EXPECT_GE(x, 0.0f);
    EXPECT_LE(x, 1.0f);
  }
}

TEST(ComputeViews, WorkerCountInvariant) {
  std::mt19937_64 rng(23);
  AgentStore s = oracle::random_store(300, kWorld, rng);
  const auto a = views_of(s, ViewConfig{}, kOneChannel, 1);
  EXPECT_EQ(a, views_of(s, ViewConfig{}, kOneChannel, 4));
  EXPECT_EQ(a, views_of(s, ViewConfig{}, kOneChannel, 9));
}

TEST(ComputeViews, MonotoneAsNeighbourApproaches) {
  const ViewConfig cfg{.v = 9};
  float prev = 2.0f;
  for (float d = 9.9f; d > 0.3f; d -= 0.1f) {
    AgentStore s(2, kWorld);
    s.set_agent(0, {50, 50}, 0.0f, 0.0f);
    s.set_agent(1, {50 + d, 50}, 0.0f, 0.0f);
    const float x = views_of(s, cfg)(0, 0, 4);
    EXPECT_LE(x, prev);
    prev = x;
  }
}

TEST(ComputeViews, RotationEquivariance) {
  std::mt19937_64 rng(29);
  const ViewConfig cfg{.v = 32};
  const float W = 100.0f;
  AgentStore s = oracle::random_store(60, WorldSpec{W, W}, rng);
  const auto base = views_of(s, cfg);
  // (x, y, h) -> rotated about the centre by 90, 180, 270 degrees
  for (int q = 1; q <= 3; ++q) {
    AgentStore r(s.size(), WorldSpec{W, W});
    for (std::size_t i = 0; i < s.size(); ++i) {
      const float x = s.x()[i] - W / 2, y = s.y()[i] - W / 2;
      float rx = x, ry = y;
      for (int k = 0; k < q; ++k) {
        const float t = rx;
        rx = -ry;
        ry = t;
      }
      r.set_agent(i, {rx + W / 2, ry + W / 2}, s.heading()[i] + float(q) * kPi / 2, 0.0f);
    }
    const auto rot = views_of(r, cfg);
    int off = 0;
    for (std::size_t k = 0; k < base.values().size(); ++k)
      if (std::abs(base.values()[k] - rot.values()[k]) > 1e-5f) ++off;
    // a ray that grazes a disc may flip between hit and miss
    EXPECT_LE(off, 2) << "quarter turns " << q;
  }
}

TEST(ComputeViews, ChannelSeparation) {
  std::mt19937_64 rng(31);
  const ViewConfig cfg{.v = 64, .channels = 2};
  const std::vector<int> ch{0, 1};
  AgentStore s = oracle::random_store(100, WorldSpec{40.0f, 40.0f}, rng, 2);
  const auto both = views_of(s, cfg, ch);
  // same agents, chasers (type 1) made invisible
  const auto runners_only = views_of(s, cfg, std::vector<int>{0, -1});
  for (std::size_t i = 0; i < s.size(); ++i)
    for (int k = 0; k < cfg.v; ++k) {
      EXPECT_EQ(both(i, 0, k), runners_only(i, 0, k));
      EXPECT_EQ(runners_only(i, 1, k), 1.0f);
    }
  // deleting type-1 agents outright leaves channel 0 untouched too
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.types()[i] == 0) keep.push_back(i);
  AgentStore t(keep.size(), s.world());
  for (std::size_t k = 0; k < keep.size(); ++k) t.set_agent(k, s.position(keep[k]), s.heading()[keep[k]], 0.0f);
  const auto deleted = views_of(t, cfg, ch);
  for (std::size_t k = 0; k < keep.size(); ++k)
    for (int s2 = 0; s2 < cfg.v; ++s2) EXPECT_EQ(deleted(k, 0, s2), both(keep[k], 0, s2));
}

TEST(ComputeViews, RejectsSmallGrid) {
  AgentStore s(2, kWorld);
  auto g = build_grid(s, kWorld, 5.0f);
  EXPECT_THROW(compute_views(s, g, ViewConfig{}, kOneChannel), ConfigError);
}
