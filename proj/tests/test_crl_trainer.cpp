#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "crowdnav/ppo.hpp"
#include "toy_cmdp.hpp"

using namespace crowdnav;

namespace {

GaeResult gae(const std::vector<double>& r, const std::vector<double>& v, const std::vector<bool>& done, double last,
              double discount, double lam) {
  const auto flags = std::make_unique<bool[]>(done.size());
  for (std::size_t i = 0; i < done.size(); ++i) flags[i] = done[i];
  return compute_gae(r, v, std::span<const bool>(flags.get(), done.size()), last, discount, lam);
}

ExperimentConfig small_toy(double lambda_init = 0.0) {
  ExperimentConfig c = oracle::toy_config();
  c.train.rollout_steps = 64;
  c.train.total_steps = 64 * 12;
  c.train.lambda_init = lambda_init;
  return c;
}

EnvFactory toy_factory(double cost_scale = 1.0) {
  return [cost_scale] { return std::make_unique<oracle::ToyCmdp>(cost_scale); };
}

}  // namespace

TEST(Gae, OneStepTerminal) {
  const GaeResult g = gae({1.0}, {0.5}, {true}, 0.0, 0.99, 0.95);
  EXPECT_DOUBLE_EQ(g.advantages[0], 0.5);
  EXPECT_DOUBLE_EQ(g.targets[0], 1.0);
}

TEST(Gae, TwoStepUndiscounted) {
  const GaeResult g = gae({0.0, 1.0}, {0.0, 0.0}, {false, true}, 0.0, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(g.advantages[0], 1.0);
  EXPECT_DOUBLE_EQ(g.advantages[1], 1.0);
}

TEST(Gae, ZeroTdErrorsGiveZeroAdvantages) {
  // V(s_t) = r_t + discount V(s_{t+1}) along the whole segment.
  const double d = 0.9;
  const std::vector<double> r{1.0, 2.0, 0.5};
  const double last = 3.0;
  std::vector<double> v(3);
  v[2] = r[2] + d * last;
  v[1] = r[1] + d * v[2];
  v[0] = r[0] + d * v[1];
  const GaeResult g = gae(r, v, {false, false, false}, last, d, 0.95);
  for (double a : g.advantages) EXPECT_NEAR(a, 0.0, 1e-12);
}

TEST(Gae, TerminalStopsBootstrap) {
  const GaeResult g = gae({0.0, 0.0}, {0.0, 7.0}, {true, false}, 0.0, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(g.advantages[0], 0.0);
  EXPECT_DOUBLE_EQ(g.advantages[1], -7.0);
}

TEST(Gae, DualStreamSymmetry) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  std::bernoulli_distribution ends(0.1);
  std::vector<double> reward(200), cost(200), v_r(200), v_c(200);
  std::vector<bool> done(200);
  for (int i = 0; i < 200; ++i) {
    reward[i] = n(rng);
    cost[i] = std::abs(n(rng));
    v_r[i] = n(rng);
    v_c[i] = n(rng);
    done[i] = ends(rng);
  }
  const GaeResult a = gae(reward, v_r, done, 0.4, 0.99, 0.95);
  const GaeResult b = gae(reward, v_r, done, 0.4, 0.99, 0.95);
  const GaeResult c = gae(cost, v_c, done, -0.2, 0.99, 0.95);
  EXPECT_EQ(a.advantages, b.advantages);
  EXPECT_EQ(a.targets, b.targets);
  EXPECT_NE(a.advantages, c.advantages);
}

TEST(Combined, Examples) {
  EXPECT_DOUBLE_EQ(combined_advantage(0.7, 3.0, 0.0), 0.7);
  EXPECT_DOUBLE_EQ(combined_advantage(1.0, 0.5, 2.0), 0.0);
  EXPECT_LT(combined_advantage(1.0, 0.5, 2.5), combined_advantage(1.0, 0.5, 2.0));
}

TEST(PolicyLoss, Examples) {
  EXPECT_DOUBLE_EQ(policy_loss(1.0, 0.37, 0.08), 0.37);
  EXPECT_DOUBLE_EQ(policy_loss(1.0, -2.0, 0.3), -2.0);
  EXPECT_NEAR(policy_loss(1.5, 1.0, 0.08), 1.08, 1e-12);
  EXPECT_NEAR(policy_loss(0.5, -1.0, 0.08), -0.92, 1e-12);
}

TEST(CriticLoss, Examples) {
  const std::vector<double> v{1.0}, t{3.0}, same{2.0};
  EXPECT_DOUBLE_EQ(critic_losses(v, same, t, same, 0.5, 0.5).reward, 2.0);
  EXPECT_DOUBLE_EQ(critic_losses(v, same, t, same, 0.5, 0.5).cost, 0.0);
  const std::vector<double> vc{0.0, 1.0}, tc{1.0, 3.0}, z{0.0, 0.0};
  const double base = critic_losses(z, vc, z, tc, 0.5, 0.5).cost;
  EXPECT_DOUBLE_EQ(base, 0.5 * (1.0 + 4.0) / 2.0);
  EXPECT_DOUBLE_EQ(critic_losses(z, vc, z, tc, 0.5, 1.5).cost, 3.0 * base);
}

TEST(Lambda, Examples) {
  LagrangeState s;
  s.lambda = 1.0;
  s.lr_lambda = 0.1;
  s.cost_limit = 0.5;
  s.record_episode(2.5);
  EXPECT_NEAR(lambda_update(s), 1.2, 1e-12);

  LagrangeState p;
  p.lambda = 0.05;
  p.lr_lambda = 0.1;
  p.cost_limit = 2.0;
  p.record_episode(0.0);
  EXPECT_EQ(lambda_update(p), 0.0);

  LagrangeState u;
  u.lambda = 0.7;
  u.cost_limit = 0.3;
  u.record_episode(0.1);
  u.record_episode(0.5);
  EXPECT_DOUBLE_EQ(lambda_update(u), 0.7);
}

TEST(Lambda, WindowKeepsRecentEpisodes) {
  LagrangeState s;
  s.window = 3;
  for (double c : {10.0, 1.0, 2.0, 3.0}) s.record_episode(c);
  EXPECT_DOUBLE_EQ(s.mean_cost(), 2.0);
}

TEST(Lambda, NeverNegative) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> cost(0.0, 1.0);
  LagrangeState s;
  s.lr_lambda = 0.7;
  s.cost_limit = 0.6;
  for (int i = 0; i < 2000; ++i) {
    s.record_episode(cost(rng));
    EXPECT_GE(lambda_update(s), 0.0);
  }
}

TEST(Standardize, ZeroMeanUnitVariance) {
  std::vector<double> v{1.0, 2.0, 3.0, 10.0};
  standardize(v);
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / 4.0;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  EXPECT_NEAR(mean, 0.0, 1e-12);
  EXPECT_NEAR(var / 4.0, 1.0, 1e-7);

  std::vector<double> flat{2.0, 2.0, 2.0};
  standardize(flat);
  for (double x : flat) EXPECT_EQ(x, 0.0);
  std::vector<double> one{5.0};
  standardize(one);
  EXPECT_EQ(one[0], 0.0);
}

TEST(Optim, ClipGradNorm) {
  std::vector<double> g{3.0, 4.0};
  EXPECT_DOUBLE_EQ(clip_grad_norm(g, 1.0), 5.0);
  EXPECT_NEAR(g[0], 0.6, 1e-12);
  EXPECT_NEAR(g[1], 0.8, 1e-12);
  std::vector<double> small{0.1, 0.0};
  clip_grad_norm(small, 1.0);
  EXPECT_DOUBLE_EQ(small[0], 0.1);
}

TEST(Optim, AdamFirstStepIsLearningRate) {
  Adam adam(2, 0.01);
  std::vector<double> p{1.0, 1.0};
  adam.step(p, {0.5, -3.0});
  EXPECT_NEAR(p[0], 0.99, 1e-9);
  EXPECT_NEAR(p[1], 1.01, 1e-9);
}

TEST(Optim, AdamMinimizesQuadratic) {
  Adam adam(1, 0.05);
  std::vector<double> p{4.0};
  for (int i = 0; i < 2000; ++i) adam.step(p, {2.0 * (p[0] - 1.5)});
  EXPECT_NEAR(p[0], 1.5, 1e-3);
}

TEST(Trainer, SameSeedSameLog) {
  const ExperimentConfig c = small_toy();
  PpoLagrangianTrainer a(c, toy_factory(), 9);
  PpoLagrangianTrainer b(c, toy_factory(), 9);
  const auto la = a.train();
  const auto lb = b.train();
  ASSERT_EQ(la.size(), lb.size());
  for (std::size_t i = 0; i < la.size(); ++i) {
    EXPECT_EQ(la[i].mean_reward, lb[i].mean_reward);
    EXPECT_EQ(la[i].mean_cost, lb[i].mean_cost);
    EXPECT_EQ(la[i].lambda, lb[i].lambda);
  }
  EXPECT_EQ(a.params().shared, b.params().shared);
  EXPECT_EQ(a.params().cost, b.params().cost);
}

TEST(Trainer, CrowdEnvironmentDeterministic) {
  ExperimentConfig c;
  c.world.n_humans = 3;
  c.train.rollout_steps = 128;
  c.train.n_parallel_envs = 4;
  c.train.total_steps = 256;
  const EnvFactory f = [c] { return std::make_unique<CrowdEnvironment>(c); };
  PpoLagrangianTrainer a(c, f, 5), b(c, f, 5);
  a.train();
  b.train();
  EXPECT_EQ(a.params().shared, b.params().shared);
  EXPECT_EQ(a.env_steps(), 256);
}

TEST(Trainer, ZeroCostDecaysLambda) {
  ExperimentConfig c = small_toy(1.0);
  c.train.lr_lambda = 0.5;
  PpoLagrangianTrainer t(c, toy_factory(0.0), 2);
  const auto log = t.train();
  for (std::size_t i = 1; i < log.size(); ++i) EXPECT_LE(log[i].lambda, log[i - 1].lambda);
  EXPECT_EQ(t.lagrange().lambda, 0.0);
}

TEST(Trainer, FrozenLambdaIgnoresCost) {
  ExperimentConfig c = small_toy();
  c.train.freeze_lambda = true;
  PpoLagrangianTrainer with_cost(c, toy_factory(1.0), 6);
  PpoLagrangianTrainer no_cost(c, toy_factory(0.0), 6);
  for (const auto& e : with_cost.train()) EXPECT_EQ(e.lambda, 0.0);
  no_cost.train();
  EXPECT_EQ(with_cost.params().shared, no_cost.params().shared);
}

TEST(Trainer, UnconstrainedBanditPushesActionUp) {
  ExperimentConfig c = small_toy();
  c.train.rollout_steps = 256;
  c.train.total_steps = 256 * 40;
  PpoLagrangianTrainer t(c, toy_factory(0.0), 8);
  const double before = oracle::toy_action(t.params());
  t.train();
  EXPECT_GT(oracle::toy_action(t.params()), before + 0.3);
}

TEST(Trainer, LogCoversEveryIteration) {
  PpoLagrangianTrainer t(small_toy(), toy_factory(), 1);
  const auto log = t.train();
  EXPECT_EQ(log.size(), 12u);
  EXPECT_EQ(t.env_steps(), 64 * 12);
  for (const auto& e : log) {
    EXPECT_EQ(e.episodes, 64);
    EXPECT_GE(e.lambda, 0.0);
    EXPECT_DOUBLE_EQ(e.mean_reward, e.mean_cost);
    EXPECT_EQ(e.sr_recent, 1.0);
  }
}
