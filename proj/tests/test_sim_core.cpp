#include <gtest/gtest.h>

#include <cmath>

#include "crowdnav/policy_net.hpp"
#include "crowdnav/sim.hpp"

using namespace crowdnav;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.world.n_humans = 5;
  c.world.arena_half_extent = 4.0;
  c.world.goal_min_distance = 6.0;
  return c;
}

}  // namespace

TEST(SampleScenario, GoalDistanceAndRanges) {
  WorldConfig w;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Scenario s = sample_scenario(w, seed);
    EXPECT_GE(distance(s.robot.position, s.robot.goal), 8.0);
    ASSERT_EQ(s.humans.size(), 20u);
    for (std::size_t i = 0; i < s.humans.size(); ++i) {
      const AgentState& h = s.humans[i];
      EXPECT_GE(h.radius, 0.3);
      EXPECT_LE(h.radius, 0.5);
      EXPECT_GE(h.v_max, 0.5);
      EXPECT_LE(h.v_max, 1.5);
      EXPECT_GT(distance(h.position, s.robot.position), h.radius + s.robot.radius);
      for (std::size_t j = 0; j < i; ++j) {
        EXPECT_GT(distance(h.position, s.humans[j].position), h.radius + s.humans[j].radius);
      }
    }
  }
}

TEST(SampleScenario, Deterministic) {
  WorldConfig w;
  const Scenario a = sample_scenario(w, 42);
  const Scenario b = sample_scenario(w, 42);
  EXPECT_EQ(a.humans, b.humans);
  EXPECT_EQ(a.robot, b.robot);
  EXPECT_NE(sample_scenario(w, 43).humans, a.humans);
}

TEST(SampleScenario, RushingCountIsExact) {
  WorldConfig w;
  w.rushing_fraction = 0.2;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Scenario s = sample_scenario(w, seed);
    int rushing = 0;
    for (const auto& h : s.humans) rushing += h.v_max == 2.0;
    EXPECT_EQ(rushing, 4);
  }
}

TEST(SampleScenario, ImpossibleLayoutThrows) {
  WorldConfig w;
  w.arena_half_extent = 1.0;
  w.goal_min_distance = 1.0;
  w.n_humans = 40;
  EXPECT_THROW(sample_scenario(w, 1), ScenarioError);
  WorldConfig far;
  far.goal_min_distance = 100.0;
  EXPECT_THROW(sample_scenario(far, 1), ScenarioError);
}

TEST(CheckGoal, StrictThreshold) {
  AgentState r;
  r.radius = 0.2;
  r.goal = {1.0, 1.0};
  r.position = r.goal;
  EXPECT_TRUE(check_goal(r, 0.1));
  r.position = {1.0 + 0.2 + 0.1 + 0.01, 1.0};
  EXPECT_FALSE(check_goal(r, 0.1));
  r.goal = {0.0, 0.0};
  r.position = {0.5, 0.0};
  EXPECT_FALSE(check_goal(r, 0.3));
  r.position = {std::nextafter(0.5, 0.0), 0.0};
  EXPECT_TRUE(check_goal(r, 0.3));
}

TEST(MixSeed, DistinctStreams) {
  EXPECT_NE(mix_seed(1, 0), mix_seed(1, 1));
  EXPECT_NE(mix_seed(1, 0), mix_seed(2, 0));
  EXPECT_EQ(mix_seed(7, 3), mix_seed(7, 3));
}

TEST(CrowdEnv, ResetObservationShape) {
  ExperimentConfig c;
  CrowdEnv env(c);
  const Observation obs = env.reset(3);
  ASSERT_EQ(obs.humans.size(), 20u);
  ASSERT_EQ(obs.predictions.size(), 20u);
  for (const auto& p : obs.predictions) {
    ASSERT_EQ(p.points.size(), 5u);
    ASSERT_EQ(p.radii.size(), 5u);
    for (int k = 0; k < 5; ++k) EXPECT_DOUBLE_EQ(p.radii[k], c.dtaci.initial_errors[k]);
  }
}

TEST(CrowdEnv, HolonomicIntegration) {
  ExperimentConfig c = small_config();
  c.world.n_humans = 1;
  CrowdEnv env(c);
  const Observation obs = env.reset(11);
  const Vec2 start = obs.robot.position;
  const StepResult r = env.step({1.0, 0.0});
  if (r.outcome != Outcome::Collision) {
    EXPECT_DOUBLE_EQ(r.observation.robot.position.x, start.x + 0.25);
    EXPECT_DOUBLE_EQ(r.observation.robot.position.y, start.y);
  }
  CrowdEnv still(c);
  still.reset(11);
  const StepResult s = still.step({0.0, 0.0});
  EXPECT_EQ(s.observation.robot.position, start);
}

TEST(CrowdEnv, ActionClampedToVmax) {
  ExperimentConfig c = small_config();
  CrowdEnv env(c);
  const Vec2 start = env.reset(5).robot.position;
  const StepResult r = env.step({30.0, 40.0});
  EXPECT_NEAR(r.observation.robot.velocity.norm(), 1.0, 1e-12);
  EXPECT_NEAR(distance(r.observation.robot.position, start), 0.25, 1e-12);
}

TEST(CrowdEnv, PotentialRewardIsWeightedProgress) {
  ExperimentConfig c = small_config();
  c.world.n_humans = 1;
  CrowdEnv env(c);
  const Observation obs = env.reset(21);
  const double before = distance(obs.robot.position, obs.robot.goal);
  const Vec2 dir = (obs.robot.goal - obs.robot.position) / before;
  const StepResult r = env.step(dir);
  ASSERT_EQ(r.outcome, Outcome::Running);
  EXPECT_NEAR(r.reward, 2.0 * 0.25, 1e-12);
  EXPECT_NEAR(before - distance(r.observation.robot.position, obs.robot.goal), 0.25, 1e-12);
}

TEST(CrowdEnv, StepAfterDoneIsUsageError) {
  ExperimentConfig c = small_config();
  c.world.max_steps = 2;
  CrowdEnv env(c);
  EXPECT_THROW(env.step({0, 0}), UsageError);
  env.reset(1);
  StepResult r;
  while (!env.done()) r = env.step({0, 0});
  EXPECT_NE(r.outcome, Outcome::Running);
  EXPECT_TRUE(r.done);
  EXPECT_THROW(env.step({0, 0}), UsageError);
  EXPECT_THROW(CrowdEnv(c).step({0, 0}), UsageError);
}

TEST(CrowdEnv, RewardCasesExclusive) {
  ExperimentConfig c = small_config();
  const RewardParams rp;
  int success = 0, collision = 0, timeout = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    CrowdEnv env(c);
    Observation obs = env.reset(seed);
    while (!env.done()) {
      const StepResult r = env.step(preferred_velocity(obs.robot, c.world.dt));
      EXPECT_EQ(r.done, r.outcome != Outcome::Running);
      EXPECT_GE(r.cost, 0.0);
      EXPECT_LE(r.observation.robot.velocity.norm(), c.world.robot_vmax + 1e-9);
      for (const auto& h : r.observation.humans) EXPECT_LE(h.velocity.norm(), h.v_max + 1e-9);
      bool overlap = false;
      for (const auto& h : r.observation.humans) {
        overlap |= distance(h.position, r.observation.robot.position) < h.radius + r.observation.robot.radius;
      }
      if (overlap) {
        EXPECT_EQ(r.outcome, Outcome::Collision);
        EXPECT_EQ(r.reward, rp.collision);
        ++collision;
      } else if (check_goal(r.observation.robot, rp.goal_tolerance)) {
        EXPECT_EQ(r.outcome, Outcome::Success);
        EXPECT_EQ(r.reward, rp.success);
        ++success;
      } else {
        EXPECT_NE(r.reward, rp.success);
        EXPECT_NE(r.reward, rp.collision);
        if (r.outcome == Outcome::Timeout) ++timeout;
      }
      obs = r.observation;
    }
  }
  EXPECT_GT(success, 0);
  EXPECT_GT(collision, 0);
}

TEST(CrowdEnv, CollisionWhenHumanOverlaps) {
  ExperimentConfig c = small_config();
  c.world.n_humans = 1;
  // Drive the robot into the lone human until the episode ends.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CrowdEnv env(c);
    Observation obs = env.reset(seed);
    StepResult r;
    while (!env.done()) {
      r = env.step((obs.humans[0].position - obs.robot.position) * 4.0);
      obs = r.observation;
    }
    if (r.outcome == Outcome::Collision) {
      EXPECT_DOUBLE_EQ(r.reward, -20.0);
      EXPECT_LT(distance(obs.robot.position, obs.humans[0].position), obs.robot.radius + obs.humans[0].radius);
      return;
    }
  }
  FAIL() << "robot never reached the human";
}

TEST(CrowdEnv, TimeoutAtMaxSteps) {
  ExperimentConfig c = small_config();
  c.world.n_humans = 1;
  c.world.max_steps = 7;
  CrowdEnv env(c);
  env.reset(2);
  int steps = 0;
  StepResult r;
  while (!env.done()) {
    r = env.step({0, 0});
    ++steps;
  }
  if (r.outcome == Outcome::Timeout) EXPECT_EQ(steps, 7);
  EXPECT_LE(steps, 7);
}

TEST(CrowdEnv, CostMatchesMaxIntrusion) {
  ExperimentConfig c = small_config();
  CrowdEnv env(c);
  Observation obs = env.reset(9);
  while (!env.done()) {
    const StepResult r = env.step(preferred_velocity(obs.robot, c.world.dt));
    const IntrusionReport rep = max_intrusion(r.observation.robot.position, r.observation.robot.radius,
                                              r.observation.humans, r.observation.predictions, c.buffer);
    EXPECT_EQ(r.cost, rep.depth);
    if (rep.source == IntrusionSource::None) EXPECT_EQ(r.cost, 0.0);
    obs = r.observation;
  }
}

TEST(CrowdEnv, TraceIsBitIdentical) {
  ExperimentConfig c;
  auto run = [&] {
    CrowdEnv env(c);
    Observation obs = env.reset(77);
    std::vector<double> trace;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> noise(0.0, 0.3);
    while (!env.done()) {
      const Vec2 a = preferred_velocity(obs.robot, c.world.dt) + Vec2{noise(rng), noise(rng)};
      const StepResult r = env.step(a);
      trace.insert(trace.end(), {r.observation.robot.position.x, r.observation.robot.position.y, r.reward, r.cost});
      for (const auto& h : r.observation.humans) trace.insert(trace.end(), {h.position.x, h.position.y});
      for (const auto& p : r.observation.predictions) trace.insert(trace.end(), p.radii.begin(), p.radii.end());
      obs = r.observation;
    }
    return trace;
  };
  EXPECT_EQ(run(), run());
}

TEST(CrowdEnv, HumanGoalsResampledWithinArena) {
  ExperimentConfig c = small_config();
  c.world.goal_resample_prob = 1.0;
  c.world.max_steps = 40;
  CrowdEnv env(c);
  Observation obs = env.reset(4);
  std::vector<Vec2> goals;
  for (const auto& h : obs.humans) goals.push_back(h.goal);
  bool changed = false;
  while (!env.done()) {
    const StepResult r = env.step({0, 0});
    for (std::size_t i = 0; i < goals.size(); ++i) {
      const Vec2 g = r.observation.humans[i].goal;
      EXPECT_LE(std::abs(g.x), c.world.arena_half_extent);
      EXPECT_LE(std::abs(g.y), c.world.arena_half_extent);
      if (env.t() % 5 != 0 && !(g == goals[i])) {
        // Off-period changes only happen on arrival.
        EXPECT_LT(distance(obs.humans[i].position, obs.humans[i].goal), 1.6);
      }
      changed |= env.t() == 5 && !(g == goals[i]);
      goals[i] = g;
    }
    obs = r.observation;
    if (env.t() >= 5) break;
  }
  EXPECT_TRUE(changed);
}

TEST(CrowdEnv, TranslationInvariantFeatures) {
  ExperimentConfig c = small_config();
  CrowdEnv env(c);
  Observation obs = env.reset(12);
  obs = env.step({0.3, -0.2}).observation;
  Observation shifted = obs;
  const Vec2 offset{13.5, -7.25};
  shifted.robot.position += offset;
  shifted.robot.goal += offset;
  for (auto& h : shifted.humans) {
    h.position += offset;
    h.goal += offset;
  }
  for (auto& p : shifted.predictions)
    for (auto& q : p.points) q += offset;
  const FeatureEncoding a = encode(obs);
  const FeatureEncoding b = encode(shifted);
  EXPECT_LT((a.humans - b.humans).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((a.ego - b.ego).cwiseAbs().maxCoeff(), 1e-12);
}
