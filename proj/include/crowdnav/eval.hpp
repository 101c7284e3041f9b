#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "crowdnav/config.hpp"
#include "crowdnav/policy_net.hpp"
#include "crowdnav/sim.hpp"

namespace crowdnav {

/// Maps an observation to a world-frame velocity command.
class RobotPolicy {
 public:
  virtual ~RobotPolicy() = default;
  virtual Vec2 act(const Observation& obs) = 0;
  virtual std::string name() const = 0;
};

/// Trained network in evaluation mode: the action is the Gaussian mean.
class NetworkPolicy final : public RobotPolicy {
 public:
  explicit NetworkPolicy(NetworkParams params) : params_(std::move(params)) {}
  Vec2 act(const Observation& obs) override;
  std::string name() const override { return "network"; }

 private:
  NetworkParams params_;
};

/// Rule-based robot driven by ORCA against the (non-reacting) humans.
class OrcaRobotPolicy final : public RobotPolicy {
 public:
  OrcaRobotPolicy(OrcaParams params, double dt) : params_(params), dt_(dt) {}
  Vec2 act(const Observation& obs) override;
  std::string name() const override { return "orca"; }

 private:
  OrcaParams params_;
  double dt_;
};

/// Rule-based robot driven by social force.
class SfRobotPolicy final : public RobotPolicy {
 public:
  SfRobotPolicy(SfParams params, double dt) : params_(params), dt_(dt) {}
  Vec2 act(const Observation& obs) override;
  std::string name() const override { return "sf"; }

 private:
  SfParams params_;
  double dt_;
};

/// Heads straight for the goal at full speed, ignoring humans.
class GoalSeekingPolicy final : public RobotPolicy {
 public:
  explicit GoalSeekingPolicy(double dt) : dt_(dt) {}
  Vec2 act(const Observation& obs) override { return preferred_velocity(obs.robot, dt_); }
  std::string name() const override { return "goal_seeking"; }

 private:
  double dt_;
};

std::unique_ptr<RobotPolicy> make_baseline_policy(const std::string& name, const ExperimentConfig& config);

struct EpisodeMetrics {
  std::uint64_t seed = 0;
  Outcome outcome = Outcome::Running;
  double nav_time = 0.0;
  double path_length = 0.0;
  int intrusion_steps = 0;
  int total_steps = 0;
  /// Surface separation to the nearest human at every intrusion step.
  std::vector<double> intrusion_distances;
};

/// Nearest-human surface separation: min_h ‖p_robot - p_h‖ - r_robot - r_h.
double surface_separation(const AgentState& robot, std::span<const AgentState> humans);

struct BatchReport {
  double sr = 0.0;
  double cr = 0.0;
  double tr = 0.0;
  /// NT and PL average successful episodes only; NaN when none succeeded.
  double nt = 0.0;
  double pl = 0.0;
  double itr = 0.0;
  /// Mean over all intrusion steps of all episodes; NaN without intrusions.
  double sd = 0.0;
  int n_episodes = 0;
  std::vector<std::uint64_t> seeds;
};

/// Order-independent: episodes are sorted by seed before summation.
BatchReport aggregate(std::vector<EpisodeMetrics> episodes, std::vector<std::uint64_t> base_seeds = {});

nlohmann::json report_json(const BatchReport& report);

/// Streams one JSON object per line: a header record, then one record per
/// step holding the post-step state.
class TrajectoryWriter {
 public:
  explicit TrajectoryWriter(const std::filesystem::path& path);
  void header(const nlohmann::json& header);
  void step(int t, const Vec2& action, const StepResult& result);

 private:
  std::ofstream out_;
};

EpisodeMetrics run_episode(const ExperimentConfig& config, RobotPolicy& policy, std::uint64_t seed,
                           TrajectoryWriter* writer = nullptr);

/// Episode seeds for a batch: n_episodes split as evenly as possible over the
/// base seeds (earlier seeds take the remainder), episode j of base seed s
/// getting mix_seed(s, j).
std::vector<std::uint64_t> episode_seeds(std::span<const std::uint64_t> base_seeds, int n_episodes);

BatchReport run_eval(const ExperimentConfig& config, RobotPolicy& policy, int n_episodes,
                     std::span<const std::uint64_t> base_seeds, std::vector<EpisodeMetrics>* episodes = nullptr);

void write_episode_csv(const std::filesystem::path& path, const std::vector<EpisodeMetrics>& episodes);

/// Writes the trajectory of one episode as JSON Lines.
EpisodeMetrics dump_trajectory(const ExperimentConfig& config, RobotPolicy& policy, std::uint64_t seed,
                               const std::filesystem::path& out_path);

struct ReplayResult {
  bool identical = false;
  int steps = 0;
  std::string mismatch;
};

/// Re-simulates a dump from the seed and configuration in its header and the
/// recorded actions, comparing every recorded state exactly.
ReplayResult replay_dump(const std::filesystem::path& path);

/// Rebuilds the episode metrics from the geometry stored in a dump.
EpisodeMetrics metrics_from_dump(const std::filesystem::path& path);

/// All records of a dump, header first.
std::vector<nlohmann::json> read_dump(const std::filesystem::path& path);

struct CoverageRow {
  int episode = 0;
  int step = 0;
  CoverageEvent event;
};

struct CoverageReport {
  std::vector<CoverageRow> rows;
  /// coverage[h][k] over all episodes.
  std::vector<std::vector<double>> per_cell;
  double aggregate = 0.0;
  /// (step, k, radius - actual) for human 0 in the first episode.
  std::vector<std::tuple<int, int, double>> trace;
};

CoverageReport run_coverage_report(const ExperimentConfig& config, RobotPolicy& policy, int n_episodes,
                                   std::span<const std::uint64_t> base_seeds);

/// Columns: step, h, k, actual, sampled_radius, covered_flag. `step` restarts
/// at 1 in each episode; `h` is 0-based, `k` counts steps ahead from 1.
void write_coverage_csv(const std::filesystem::path& path, const CoverageReport& report);

nlohmann::json coverage_summary(const CoverageReport& report);

}  // namespace crowdnav
