#include <gtest/gtest.h>

#include <random>

#include "crowdnav/ped_policies.hpp"
#include "orca_swap.hpp"

using namespace crowdnav;

namespace {

AgentState agent(Vec2 pos, Vec2 goal, Vec2 vel = {}, double radius = 0.3, double vmax = 1.0) {
  AgentState a;
  a.position = pos;
  a.goal = goal;
  a.velocity = vel;
  a.radius = radius;
  a.v_max = vmax;
  return a;
}

AgentState mirror(AgentState a) {
  a.position.y = -a.position.y;
  a.goal.y = -a.goal.y;
  a.velocity.y = -a.velocity.y;
  return a;
}

}  // namespace

TEST(Orca, NoNeighborsGivesPreferredVelocity) {
  const AgentState a = agent({0, 0}, {3, 4});
  const Vec2 v = orca_velocity(a, {}, OrcaParams{}, 0.25);
  EXPECT_NEAR(v.x, 0.6, 1e-12);
  EXPECT_NEAR(v.y, 0.8, 1e-12);
}

TEST(Orca, HeadOnSwapCompletesWithoutCollision) {
  const oracle::SwapResult r = oracle::head_on_swap(OrcaParams{}, 0.25);
  EXPECT_TRUE(r.reached);
  EXPECT_LE(r.steps, 500);
  EXPECT_GT(r.min_distance, 0.6);
  EXPECT_TRUE(r.point_symmetric);
}

TEST(Orca, HeadOnSwapDeterministic) {
  const oracle::SwapResult a = oracle::head_on_swap(OrcaParams{}, 0.25);
  const oracle::SwapResult b = oracle::head_on_swap(OrcaParams{}, 0.25);
  EXPECT_EQ(a.steps, b.steps);
  EXPECT_EQ(a.min_distance, b.min_distance);
}

TEST(Orca, MirrorSymmetricScenes) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  std::uniform_real_distribution<double> s(-1.0, 1.0);
  const OrcaParams params;
  for (int trial = 0; trial < 500; ++trial) {
    const AgentState self = agent({u(rng), u(rng)}, {u(rng), u(rng)}, {s(rng) * 0.7, s(rng) * 0.7});
    std::vector<AgentState> others;
    for (int j = 0; j < 4; ++j) {
      AgentState o = agent({u(rng), u(rng)}, {u(rng), u(rng)}, {s(rng) * 0.7, s(rng) * 0.7}, 0.4);
      if (distance(o.position, self.position) > 0.8) others.push_back(o);
    }
    std::vector<AgentState> mirrored;
    for (const auto& o : others) mirrored.push_back(mirror(o));
    const Vec2 v = orca_velocity(self, others, params, 0.25);
    const Vec2 w = orca_velocity(mirror(self), mirrored, params, 0.25);
    EXPECT_NEAR(v.x, w.x, 1e-9);
    EXPECT_NEAR(v.y, -w.y, 1e-9);
    EXPECT_LE(v.norm(), self.v_max + 1e-9);
  }
}

TEST(Orca, SolutionSatisfiesFeasibleConstraints) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int feasible_cases = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<OrcaLine> lines;
    for (int i = 0; i < 3; ++i) {
      const double angle = u(rng) * 3.14159265358979;
      lines.push_back({{u(rng) * 0.5, u(rng) * 0.5}, {std::cos(angle), std::sin(angle)}});
    }
    const Vec2 pref{u(rng), u(rng)};
    const Vec2 v = solve_orca_program(lines, 1.0, pref);
    EXPECT_LE(v.norm(), 1.0 + 1e-9);
    // Brute force: is any grid point feasible?
    bool any = false;
    for (double x = -1; x <= 1 && !any; x += 0.02)
      for (double y = -1; y <= 1 && !any; y += 0.02) {
        const Vec2 p{x, y};
        if (p.norm() > 1.0) continue;
        bool ok = true;
        for (const auto& l : lines) ok &= det(l.direction, l.point - p) <= 0.0;
        any = ok;
      }
    if (!any) continue;
    ++feasible_cases;
    for (const auto& l : lines) EXPECT_LE(det(l.direction, l.point - v), 1e-7);
  }
  EXPECT_GT(feasible_cases, 100);
}

TEST(Orca, SpeedNeverExceedsVmax) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 500; ++trial) {
    const AgentState self = agent({0, 0}, {u(rng) * 3, u(rng) * 3}, {u(rng) * 0.3, u(rng) * 0.3}, 0.3, 0.8);
    std::vector<AgentState> others;
    for (int j = 0; j < 6; ++j) others.push_back(agent({u(rng), u(rng)}, {0, 0}, {u(rng) * 0.5, u(rng) * 0.5}));
    EXPECT_LE(orca_velocity(self, others, OrcaParams{}, 0.25).norm(), 0.8 + 1e-9);
  }
}

TEST(SocialForce, EquilibriumWithoutNeighbors) {
  AgentState a = agent({0, 0}, {10, 0}, {1, 0});
  const SfParams p;
  const Vec2 f = sf_force(a, {}, p, 0.25);
  EXPECT_DOUBLE_EQ(f.x, 0.0);
  EXPECT_DOUBLE_EQ(f.y, 0.0);
  EXPECT_EQ(sf_velocity(a, {}, p, 0.25), a.velocity);
}

TEST(SocialForce, NeighborAheadPushesBackOnAxis) {
  const AgentState a = agent({0, 0}, {10, 0}, {1, 0});
  const AgentState ahead = agent({1.0, 0}, {10, 0});
  const SfParams p;
  const AgentState n[] = {ahead};
  const Vec2 f = sf_force(a, n, p, 0.25);
  const double expected = -p.repulsion_strength * std::exp((0.6 - 1.0) / p.repulsion_range);
  EXPECT_DOUBLE_EQ(f.y, 0.0);
  EXPECT_NEAR(f.x, expected, 1e-12);
  const Vec2 v = sf_velocity(a, n, p, 0.25);
  EXPECT_LT(v.x, 1.0);
  EXPECT_DOUBLE_EQ(v.y, 0.0);
}

TEST(SocialForce, Superposition) {
  const AgentState a = agent({0, 0}, {5, 5}, {0.2, -0.1});
  const AgentState b = agent({1.0, 0.5}, {0, 0});
  const AgentState c = agent({-0.7, 0.9}, {0, 0});
  const SfParams p;
  const Vec2 drive = sf_force(a, {}, p, 0.25);
  const AgentState nb[] = {b}, nc[] = {c}, both[] = {b, c};
  const Vec2 sum = sf_force(a, nb, p, 0.25) + sf_force(a, nc, p, 0.25) - drive;
  const Vec2 f = sf_force(a, both, p, 0.25);
  EXPECT_NEAR(f.x, sum.x, 1e-12);
  EXPECT_NEAR(f.y, sum.y, 1e-12);
}

TEST(SocialForce, CoincidentCentersRepelAlongX) {
  const AgentState a = agent({1, 1}, {1, 1});
  const AgentState b = agent({1, 1}, {0, 0});
  const AgentState n[] = {b};
  const Vec2 f = sf_force(a, n, SfParams{}, 0.25);
  EXPECT_GT(f.x, 0.0);
  EXPECT_DOUBLE_EQ(f.y, 0.0);
}

TEST(SocialForce, ClampedToVmax) {
  const AgentState a = agent({0, 0}, {10, 0}, {0.9, 0}, 0.3, 1.0);
  const AgentState behind = agent({-0.5, 0}, {0, 0});
  const AgentState n[] = {behind};
  EXPECT_LE(sf_velocity(a, n, SfParams{}, 0.25).norm(), 1.0 + 1e-12);
}
