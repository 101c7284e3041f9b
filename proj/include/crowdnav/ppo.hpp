#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "crowdnav/config.hpp"
#include "crowdnav/policy_net.hpp"
#include "crowdnav/sim.hpp"

namespace crowdnav {

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> targets;
};

/// Generalized advantage estimation over one contiguous segment. A step with
/// dones[t] set ends its episode (next value 0); `last_value` bootstraps the
/// step after the segment when the final step is not terminal. The same
/// routine serves the reward and the cost stream.
GaeResult compute_gae(std::span<const double> signal, std::span<const double> values, std::span<const bool> dones,
                      double last_value, double discount, double gae_lambda);

/// A' = A_R - lambda * A_C.
inline double combined_advantage(double a_reward, double a_cost, double lambda) { return a_reward - lambda * a_cost; }

/// Clipped surrogate min(r A, clip(r, 1 - eps, 1 + eps) A); to be maximized.
double policy_loss(double ratio, double advantage, double clip);

struct CriticLosses {
  double reward = 0.0;
  double cost = 0.0;
};

/// Batch means of c1 (V_R - target_R)^2 and c2 (V_C - target_C)^2.
CriticLosses critic_losses(std::span<const double> value_r, std::span<const double> value_c,
                           std::span<const double> target_r, std::span<const double> target_c, double c1, double c2);

/// Lagrange multiplier with the recent episode costs that define C-bar.
struct LagrangeState {
  double lambda = 0.0;
  double lr_lambda = 5e-2;
  double cost_limit = 0.16;
  std::size_t window = 20;
  std::deque<double> episode_costs;

  void record_episode(double cost_sum);
  double mean_cost() const;
};

/// Projected gradient step on -lambda (C-bar - limit):
/// lambda <- max(0, lambda + lr (C-bar - limit)). Returns the new lambda.
double lambda_update(LagrangeState& state);

/// In-place standardization to zero mean and unit variance (population
/// std, 1e-8 floor). Sequences shorter than two are only centered.
void standardize(std::span<double> values);

/// One sample of the composite PPO-Lagrangian objective.
struct LossSample {
  const FeatureEncoding* features = nullptr;
  Vec2 action;  // robot-centric frame
  double old_log_prob = 0.0;
  double advantage = 0.0;  // combined, already normalized
  double target_r = 0.0;
  double target_c = 0.0;
};

struct LossWeights {
  double policy = 1.0;
  double value_r = 0.5;  // c1
  double value_c = 0.5;  // c2
  double clip = 0.08;
};

/// Which branch of min/clip each sample took, plus every rectifier pattern.
/// Replaying it evaluates the loss on a fixed smooth piece.
struct LossBranches {
  std::vector<EncoderGates> actor;
  std::vector<EncoderGates> cost;
  /// 0: r * A active, otherwise the clipped constant factor is stored.
  std::vector<double> clipped_factor;
  std::vector<bool> clipped;
};

struct LossStats {
  double loss = 0.0;
  double surrogate = 0.0;
  double value_r_loss = 0.0;
  double value_c_loss = 0.0;
  double clip_fraction = 0.0;
};

/// loss = mean_i [ -w_pi * surrogate_i + c1 (V_R - t_R)^2 + c2 (V_C - t_C)^2 ].
/// Adds the exact gradient into `grads` when given.
LossStats composite_loss(const NetworkParams& params, std::span<const LossSample> batch, const LossWeights& weights,
                         Gradients* grads = nullptr, LossBranches* record = nullptr,
                         const LossBranches* replay = nullptr);

class Adam {
 public:
  Adam(std::size_t n, double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(std::vector<double>& params, const std::vector<double>& grads);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::vector<double> m_, v_;
  std::int64_t t_ = 0;
};

/// Rescales `grads` so its L2 norm is at most `max_norm`; returns the norm
/// before clipping.
double clip_grad_norm(std::vector<double>& grads, double max_norm);

/// Anything the trainer can roll out in: a CMDP emitting reward and cost.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual Observation reset(std::uint64_t seed) = 0;
  virtual StepResult step(const Vec2& world_action) = 0;
};

/// CrowdEnv behind the trainer interface.
class CrowdEnvironment final : public Environment {
 public:
  explicit CrowdEnvironment(ExperimentConfig config) : env_(std::move(config)) {}
  Observation reset(std::uint64_t seed) override { return env_.reset(seed); }
  StepResult step(const Vec2& world_action) override { return env_.step(world_action); }
  const CrowdEnv& env() const { return env_; }

 private:
  CrowdEnv env_;
};

using EnvFactory = std::function<std::unique_ptr<Environment>()>;

struct IterationLog {
  int iteration = 0;
  std::int64_t env_steps = 0;
  int episodes = 0;
  double mean_reward = 0.0;
  double mean_cost = 0.0;
  double lambda = 0.0;
  double sr_recent = 0.0;
  double surrogate = 0.0;
  double value_r_loss = 0.0;
  double value_c_loss = 0.0;
  double clip_fraction = 0.0;
};

/// PPO-Lagrangian: collects rollouts from n_parallel_envs environments,
/// estimates reward and cost advantages, ascends the multiplier, then runs
/// clipped-surrogate epochs on the combined advantage.
class PpoLagrangianTrainer {
 public:
  PpoLagrangianTrainer(ExperimentConfig config, EnvFactory factory, std::uint64_t seed);
  /// Resume from existing parameters instead of a fresh initialization.
  PpoLagrangianTrainer(ExperimentConfig config, EnvFactory factory, std::uint64_t seed, NetworkParams initial);

  IterationLog iterate();
  std::vector<IterationLog> train(const std::function<void(const IterationLog&)>& on_iteration = {});

  const NetworkParams& params() const { return params_; }
  const LagrangeState& lagrange() const { return lagrange_; }
  const std::vector<IterationLog>& log() const { return log_; }
  std::int64_t env_steps() const { return env_steps_; }

 private:
  struct Transition {
    FeatureEncoding features;
    Vec2 action;
    double log_prob = 0.0;
    double reward = 0.0;
    double cost = 0.0;
    double value_r = 0.0;
    double value_c = 0.0;
    bool done = false;
    double adv_r = 0.0;
    double adv_c = 0.0;
    double target_r = 0.0;
    double target_c = 0.0;
  };

  struct Worker {
    std::unique_ptr<Environment> env;
    Observation obs;
    std::uint64_t stream = 0;
    std::uint64_t episodes = 0;
    double episode_reward = 0.0;
    double episode_cost = 0.0;
  };

  void collect(std::vector<Transition>& batch, IterationLog& entry);
  void update(std::vector<Transition>& batch, IterationLog& entry);
  std::uint64_t next_episode_seed(Worker& w);

  ExperimentConfig config_;
  std::uint64_t seed_;
  NetworkParams params_;
  Adam adam_shared_;
  Adam adam_cost_;
  LagrangeState lagrange_;
  std::vector<Worker> workers_;
  std::mt19937_64 action_rng_;
  std::mt19937_64 shuffle_rng_;
  std::deque<bool> recent_success_;
  std::vector<IterationLog> log_;
  std::int64_t env_steps_ = 0;
  int iteration_ = 0;
};

}  // namespace crowdnav
