#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "crowdnav/agent.hpp"
#include "crowdnav/buffer_cost.hpp"
#include "crowdnav/config.hpp"
#include "crowdnav/dtaci.hpp"
#include "crowdnav/predictor.hpp"

namespace crowdnav {

enum class Outcome { Running, Success, Collision, Timeout };

std::string to_string(Outcome o);
Outcome outcome_from_string(const std::string& s);

/// What the policy sees: ego state, human states and one prediction set
/// (points plus error radii) per human.
struct Observation {
  AgentState robot;
  std::vector<AgentState> humans;
  std::vector<PredictionSet> predictions;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  double cost = 0.0;
  bool done = false;
  Outcome outcome = Outcome::Running;
  IntrusionReport intrusion;
};

struct Scenario {
  std::vector<AgentState> humans;
  AgentState robot;
};

/// Derives an independent 64-bit stream seed (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Random start/goal layout. Throws ScenarioError when rejection sampling
/// cannot place an agent.
Scenario sample_scenario(const WorldConfig& config, std::uint64_t seed);

/// Strictly inside radius + tolerance of the goal.
bool check_goal(const AgentState& robot, double goal_tolerance);

/// Realized error of one (human, step) prediction against the radius that
/// was issued with it.
struct CoverageEvent {
  int human = 0;
  int step = 0;  // 0-based prediction step
  double actual = 0.0;
  double radius = 0.0;
  bool covered = false;
};

/// Velocities for every human at the current instant, each agent seeing the
/// other humans but not the robot.
std::vector<Vec2> pedestrian_velocities(const std::vector<AgentState>& humans, const WorldConfig& config);

/// Seeded crowd-navigation episode: holonomic robot, reactive pedestrians,
/// K-step predictions with adaptive error radii, buffer-intrusion cost.
class CrowdEnv {
 public:
  explicit CrowdEnv(ExperimentConfig config,
                    std::shared_ptr<const Predictor> predictor = std::make_shared<ConstantVelocityPredictor>());

  Observation reset(std::uint64_t seed);
  StepResult step(const Vec2& action);

  Observation observation() const;

  const ExperimentConfig& config() const { return config_; }
  const AgentState& robot() const { return robot_; }
  const std::vector<AgentState>& humans() const { return humans_; }
  const std::vector<PredictionSet>& predictions() const { return current_predictions(); }
  const EstimatorBank& estimators() const { return bank_; }
  const IntrusionReport& last_intrusion() const { return last_intrusion_; }
  const std::vector<CoverageEvent>& coverage_events() const { return events_; }
  int t() const { return t_; }
  bool done() const { return outcome_ != Outcome::Running; }
  Outcome outcome() const { return outcome_; }
  std::uint64_t seed() const { return seed_; }

 private:
  const std::vector<PredictionSet>& current_predictions() const { return history_.back(); }
  void advance_humans();
  void resample_goals();
  void refresh_predictions();
  Vec2 random_arena_point();

  ExperimentConfig config_;
  std::shared_ptr<const Predictor> predictor_;
  AgentState robot_;
  std::vector<AgentState> humans_;
  EstimatorBank bank_;
  /// Prediction sets issued at the last K + 1 steps, newest at the back.
  std::deque<std::vector<PredictionSet>> history_;
  std::vector<CoverageEvent> events_;
  IntrusionReport last_intrusion_;
  std::mt19937_64 rng_;
  std::uint64_t seed_ = 0;
  int t_ = 0;
  Outcome outcome_ = Outcome::Running;
  bool started_ = false;
};

}  // namespace crowdnav
