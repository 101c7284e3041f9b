#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace crowdnav {

enum class PedestrianModel { Orca, SocialForce };

struct OrcaParams {
  double time_horizon = 5.0;
  double neighbor_dist = 10.0;
  double responsibility = 0.5;
};

struct SfParams {
  double relaxation_time = 0.5;
  double repulsion_strength = 2.0;
  double repulsion_range = 0.3;
};

/// Magnitudes of the three mutually exclusive reward cases.
struct RewardParams {
  double success = 10.0;
  double collision = -20.0;
  double potential_weight = 2.0;
  double goal_tolerance = 0.1;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct WorldConfig {
  double arena_half_extent = 6.0;
  int n_humans = 20;
  double robot_radius = 0.2;
  Range human_radius_range{0.3, 0.5};
  Range human_vmax_range{0.5, 1.5};
  double robot_vmax = 1.0;
  double dt = 0.25;
  int max_steps = 200;
  double goal_min_distance = 8.0;
  double goal_resample_prob = 0.5;
  int goal_resample_period = 5;
  double rushing_fraction = 0.0;
  double rushing_vmax = 2.0;
  PedestrianModel pedestrian_model = PedestrianModel::Orca;
  /// Extra clearance between agents at spawn, on top of the radii sum.
  double spawn_margin = 0.2;
  OrcaParams orca;
  SfParams sf;
  RewardParams reward;

  void validate() const;
};

struct DtaciConfig {
  double alpha = 0.1;
  std::vector<double> learning_rates{0.05, 0.1, 0.2};
  double sigma = 0.05;
  double eta = 10.0;
  /// One initial estimate per prediction horizon k = 1..K.
  std::vector<double> initial_errors{0.1, 0.2, 0.3, 0.4, 0.5};

  void validate() const;
};

struct BufferSpec {
  double r_disc = 0.25;
  int k_prime = 2;
  double mu = 1.0;

  void validate(int horizon) const;
};

struct NetworkConfig {
  int embed_dim = 32;
  int attention_dim = 32;
  int trunk_dim = 64;
  double fixed_action_std = 0.2;

  void validate() const;
};

/// Standardize (zero mean, unit variance) per minibatch or per rollout, or
/// only subtract the minibatch mean.
enum class AdvantageNormalization { None, Minibatch, Batch, MinibatchCenter };

struct TrainConfig {
  double discount = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.08;
  int epochs = 4;
  int minibatch_size = 32;
  double c1 = 0.5;
  double c2 = 0.5;
  double learning_rate = 3e-4;
  double max_grad_norm = 0.5;
  double lr_lambda = 5e-2;
  double lambda_init = 0.0;
  bool freeze_lambda = false;
  double cost_limit = 0.16;
  int cost_window = 20;
  std::int64_t total_steps = 2'000'000;
  int rollout_steps = 4096;
  int n_parallel_envs = 8;
  AdvantageNormalization reward_normalization = AdvantageNormalization::Minibatch;
  AdvantageNormalization cost_normalization = AdvantageNormalization::MinibatchCenter;
  /// Episodes kept for the sr_recent column of the training log.
  int log_window = 100;

  void validate() const;
};

/// Everything needed to build environments, networks and the trainer.
struct ExperimentConfig {
  WorldConfig world;
  DtaciConfig dtaci;
  BufferSpec buffer;
  int horizon = 5;
  NetworkConfig network;
  TrainConfig train;

  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text);

/// 64-bit FNV-1a over the canonical JSON dump of the configuration.
std::uint64_t config_hash(const ExperimentConfig& c);

/// Named environment variations: "rushing" (20% of humans at 2.0 m/s),
/// "sf" (pedestrians driven by social force) and "desk" (5 humans, 8 m arena).
void apply_preset(ExperimentConfig& c, const std::string& name);

}  // namespace crowdnav
