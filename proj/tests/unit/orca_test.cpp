#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "uavnav/orca.hpp"

using namespace uavnav;
using namespace uavnav::orca;
using world::ObservedNeighbor;
using world::UavState;

namespace {

radio::RadioEnvironment quiet_env() {
  return radio::RadioEnvironment({radio::GroundStation{}}, std::nullopt, radio::RadioParams{});
}

// Truncated velocity obstacle membership: some t in (0, tau] brings the relative
// position p within R.
bool in_vo(Vec2 v, Vec2 p, double r, double tau) {
  const double vv = dot(v, v);
  double t = vv > 0 ? dot(v, p) / vv : tau;
  t = std::clamp(t, 1e-12, tau);
  return norm(v * t - p) < r;
}

// Nearest VO boundary point from an interior velocity, by ray bisection.
Vec2 vo_escape(Vec2 v, Vec2 p, double r, double tau) {
  double best = 1e9;
  Vec2 best_u;
  const int n = 40000;
  for (int k = 0; k < n; ++k) {
    const Vec2 dir = unit_vector(2 * std::numbers::pi * k / n);
    double lo = 0, hi = 50;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (in_vo(v + dir * mid, p, r, tau) ? lo : hi) = mid;
    }
    if (hi < best) {
      best = hi;
      best_u = dir * hi;
    }
  }
  return best_u;
}

UavState agent(Vec2 p, Vec2 v, Vec2 dest) {
  UavState s;
  s.position = p;
  s.velocity = v;
  s.destination = dest;
  s.radius = 1.0;
  return s;
}

ObservedNeighbor seen(const UavState& s) { return {s.position, s.velocity, s.radius, s.velocity}; }

}  // namespace

TEST(Orca, NoConflictPermitsCurrentVelocity) {
  const auto a = agent({0, 0}, {0.5, 0}, {20, 0});
  const auto b = agent({10, 0}, {0.5, 0}, {30, 0});
  const auto h = orca_halfplane(a, seen(b), 2.0, 0.5);
  EXPECT_TRUE(h.permits(a.velocity, 1e-12));
  EXPECT_NEAR(norm(h.normal), 1.0, 1e-9);
}

TEST(Orca, HeadOnMirror) {
  const auto a = agent({0, 0}, {1, 0}, {10, 0});
  const auto b = agent({10, 0}, {-1, 0}, {0, 0});
  const auto ha = orca_halfplane(a, seen(b), 5.0, 0.5);
  const auto hb = orca_halfplane(b, seen(a), 5.0, 0.5);
  EXPECT_NEAR(ha.point.x, -hb.point.x, 1e-12);
  EXPECT_NEAR(ha.point.y, -hb.point.y, 1e-12);
  EXPECT_NEAR(ha.normal.x, -hb.normal.x, 1e-12);
  EXPECT_NEAR(ha.normal.y, -hb.normal.y, 1e-12);
  EXPECT_FALSE(ha.permits(a.velocity));
}

TEST(Orca, HalfPlaneMatchesGeometricOracle) {
  const auto a = agent({0, 0}, {1, 0.3}, {20, 0});
  const auto b = agent({5, 1}, {-1, 0}, {-20, 0});
  const double tau = 2.0;
  const Vec2 rel_p = b.position - a.position;
  const Vec2 rel_v = a.velocity - b.velocity;
  ASSERT_TRUE(in_vo(rel_v, rel_p, 2.0, tau));
  const Vec2 u = vo_escape(rel_v, rel_p, 2.0, tau);
  const auto h = orca_halfplane(a, seen(b), tau, 0.5);
  const Vec2 n = normalized(u);
  EXPECT_NEAR(h.normal.x, n.x, 1e-3);
  EXPECT_NEAR(h.normal.y, n.y, 1e-3);
  const Vec2 expect_point = a.velocity + 0.5 * u;
  EXPECT_NEAR(dot(h.point - expect_point, h.normal), 0.0, 1e-3);
}

TEST(Orca, VelocityUnconstrained) {
  const auto a = agent({0, 0}, {0, 0}, {20, 0});
  OrcaConfig cfg;
  const Vec2 pref{2.0, 1.0};
  EXPECT_EQ(orca_velocity(a, {}, pref, cfg, 0.5), pref);
  const auto far = agent({40, 0}, {-3, 0}, {-20, 0});
  const auto n = seen(far);
  EXPECT_EQ(orca_velocity(a, std::span(&n, 1), pref, cfg, 0.5), pref);
}

TEST(Orca, VelocityRespectsConstraints) {
  const auto a = agent({0, 0}, {3, 0}, {20, 0});
  std::vector<ObservedNeighbor> ns{seen(agent({4, 0.5}, {-3, 0}, {-20, 0})),
                                   seen(agent({3, -3}, {0, 3}, {3, 20}))};
  OrcaConfig cfg;
  const Vec2 v = orca_velocity(a, ns, {3, 0}, cfg, 0.5);
  EXPECT_LE(norm(v), a.max_speed + 1e-9);
  for (const auto& n : ns) EXPECT_TRUE(orca_halfplane(a, n, cfg.time_horizon, 0.5).permits(v, 1e-6));
  // an interior preferred velocity is returned unchanged
  const auto h0 = orca_halfplane(a, ns[0], cfg.time_horizon, 0.5);
  const auto h1 = orca_halfplane(a, ns[1], cfg.time_horizon, 0.5);
  Vec2 inside{-0.5, 0.5};
  if (h0.permits(inside, -1e-6) && h1.permits(inside, -1e-6)) {
    EXPECT_EQ(orca_velocity(a, ns, inside, cfg, 0.5), inside);
  }
}

TEST(Orca, HeadOnRolloutDeflectsWithoutCollision) {
  world::ScenarioConfig sc;
  sc.agents = {{{-10, 0}, {10, 0}, 0.5, 3.0}, {{10, 0}, {-10, 0}, 0.5, 3.0}};
  world::World w(sc, world::WorldOptions{});
  const auto env = quiet_env();
  OrcaConfig cfg;
  double min_gap = 1e9, max_dev = 0;
  while (!w.done()) {
    const auto acts = orca_actions(w, cfg);
    const auto r = w.step_all(acts, env);
    EXPECT_FALSE(r.flags[0].collided);
    const auto& p = w.agents();
    min_gap = std::min(min_gap, distance(p[0].position, p[1].position));
    max_dev = std::max(max_dev, std::abs(p[0].position.y));
    EXPECT_NEAR(p[0].position.y, -p[1].position.y, 1e-9);
    EXPECT_NEAR(p[0].position.x, -p[1].position.x, 1e-9);
  }
  EXPECT_GT(min_gap, 1.0);
  EXPECT_GT(max_dev, 0.2);
  EXPECT_TRUE(w.status()[0].arrived);
  EXPECT_TRUE(w.status()[1].arrived);
}

TEST(Orca, BootstrapStraightPathValues) {
  world::ScenarioConfig sc;
  sc.agents = {{{0, 0}, {10, 0}, 0.5, 3.0}};
  BootstrapOptions opt;
  opt.gamma = 0.9;
  const auto set = generate_bootstrap_set(std::span(&sc, 1), quiet_env(), opt);
  const std::size_t k = set.pairs.size();
  ASSERT_EQ(k, 7u);
  const double g = 0.9, rt = -0.05;
  for (std::size_t i = 0; i < k; ++i) {
    const double m = static_cast<double>(k - i);
    const double expect = rt * (1 - std::pow(g, m)) / (1 - g) + 2.0 * std::pow(g, m - 1);
    EXPECT_NEAR(set.pairs[i].value, expect, 1e-12);
  }
  EXPECT_NEAR(set.pairs.back().value, 2.0 + rt, 1e-12);
  for (const auto& p : set.pairs) {
    EXPECT_LE(p.value, 2.0);
    EXPECT_EQ(p.features.size(), world::joint_state_length(4));
  }
}

TEST(Orca, BootstrapSwapNoCollisions) {
  world::ScenarioConfig sc;
  sc.agents = {{{-15, 0}, {15, 0}, 0.5, 3.0}, {{15, 0}, {-15, 0}, 0.5, 3.0},
               {{0, -15}, {0, 15}, 0.5, 3.0}};
  const auto set = generate_bootstrap_set(std::span(&sc, 1), quiet_env(), BootstrapOptions{});
  EXPECT_EQ(set.collisions, 0u);
  EXPECT_EQ(set.skipped_episodes, 0u);
  EXPECT_EQ(set.episodes, 1u);
}

TEST(Orca, BootstrapFileRoundTrip) {
  BootstrapSet set;
  set.episodes = 3;
  set.collisions = 1;
  set.pairs = {{{1.0, 2.5, -3.0}, 0.75}, {{0.0, 1e-17, 4.0}, -1.25}};
  std::stringstream ss;
  write_bootstrap(ss, set, {0.5, 1.0, 0.5}, {1.0, 2.0, 3.0}, "abc123");
  const auto back = read_bootstrap(ss);
  ASSERT_EQ(back.set.pairs.size(), 2u);
  EXPECT_EQ(back.set.pairs[1].features, set.pairs[1].features);
  EXPECT_EQ(back.set.pairs[1].value, -1.25);
  EXPECT_EQ(back.std_dev, (std::vector<double>{1.0, 2.0, 3.0}));
  EXPECT_EQ(back.digest, "abc123");
  EXPECT_EQ(back.set.collisions, 1u);
  std::stringstream bad("# something else\n");
  EXPECT_THROW(read_bootstrap(bad), std::runtime_error);
}
