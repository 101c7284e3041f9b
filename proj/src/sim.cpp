#include "crowdnav/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "crowdnav/ped_policies.hpp"

namespace crowdnav {

namespace {

constexpr int kMaxPlacementAttempts = 1000;
constexpr std::uint64_t kGoalStream = 0x6f616c73;
constexpr std::uint64_t kDtaciStream = 0x64746163;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Vec2 uniform_point(std::mt19937_64& rng, double half_extent) {
  const double x = uniform(rng, -half_extent, half_extent);
  const double y = uniform(rng, -half_extent, half_extent);
  return {x, y};
}

}  // namespace

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::Running: return "running";
    case Outcome::Success: return "success";
    case Outcome::Collision: return "collision";
    case Outcome::Timeout: return "timeout";
  }
  return "running";
}

Outcome outcome_from_string(const std::string& s) {
  if (s == "running") return Outcome::Running;
  if (s == "success") return Outcome::Success;
  if (s == "collision") return Outcome::Collision;
  if (s == "timeout") return Outcome::Timeout;
  throw std::invalid_argument("unknown outcome " + s);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Scenario sample_scenario(const WorldConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  Scenario s;

  const double robot_extent = config.arena_half_extent - config.robot_radius;
  s.robot.radius = config.robot_radius;
  s.robot.v_max = config.robot_vmax;
  bool placed = false;
  for (int attempt = 0; attempt < kMaxPlacementAttempts && !placed; ++attempt) {
    s.robot.position = uniform_point(rng, robot_extent);
    s.robot.goal = uniform_point(rng, robot_extent);
    placed = distance(s.robot.position, s.robot.goal) >= config.goal_min_distance;
  }
  if (!placed) throw ScenarioError("scenario generation: no robot start/goal pair satisfies goal_min_distance");

  const auto n = static_cast<std::size_t>(config.n_humans);
  const auto rushing = static_cast<std::size_t>(std::llround(config.rushing_fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> is_rushing(n, false);
  for (std::size_t i = 0; i < rushing; ++i) is_rushing[order[i]] = true;

  s.humans.reserve(n);
  for (std::size_t h = 0; h < n; ++h) {
    AgentState human;
    human.radius = uniform(rng, config.human_radius_range.lo, config.human_radius_range.hi);
    const double sampled_vmax = uniform(rng, config.human_vmax_range.lo, config.human_vmax_range.hi);
    human.v_max = is_rushing[h] ? config.rushing_vmax : sampled_vmax;
    const double extent = config.arena_half_extent - human.radius;
    bool ok = false;
    for (int attempt = 0; attempt < kMaxPlacementAttempts && !ok; ++attempt) {
      human.position = uniform_point(rng, extent);
      ok = distance(human.position, s.robot.position) > human.radius + s.robot.radius + config.spawn_margin;
      for (const AgentState& other : s.humans) {
        if (!ok) break;
        ok = distance(human.position, other.position) > human.radius + other.radius + config.spawn_margin;
      }
    }
    if (!ok) throw ScenarioError("scenario generation: cannot place human " + std::to_string(h) + " without overlap");
    human.goal = uniform_point(rng, extent);
    s.humans.push_back(human);
  }
  return s;
}

bool check_goal(const AgentState& robot, double goal_tolerance) {
  return distance(robot.position, robot.goal) < robot.radius + goal_tolerance;
}

std::vector<Vec2> pedestrian_velocities(const std::vector<AgentState>& humans, const WorldConfig& config) {
  std::vector<Vec2> velocities(humans.size());
  std::vector<AgentState> others;
  others.reserve(humans.size());
  for (std::size_t h = 0; h < humans.size(); ++h) {
    others.clear();
    for (std::size_t j = 0; j < humans.size(); ++j) {
      if (j != h) others.push_back(humans[j]);
    }
    velocities[h] = config.pedestrian_model == PedestrianModel::Orca
                        ? orca_velocity(humans[h], others, config.orca, config.dt)
                        : sf_velocity(humans[h], others, config.sf, config.dt);
  }
  return velocities;
}

CrowdEnv::CrowdEnv(ExperimentConfig config, std::shared_ptr<const Predictor> predictor)
    : config_(std::move(config)),
      predictor_(std::move(predictor)),
      bank_(config_.dtaci, config_.world.n_humans, config_.horizon, 0) {
  config_.validate();
  if (!predictor_) throw std::invalid_argument("CrowdEnv needs a predictor");
}

Observation CrowdEnv::reset(std::uint64_t seed) {
  seed_ = seed;
  Scenario s = sample_scenario(config_.world, seed);
  robot_ = s.robot;
  humans_ = std::move(s.humans);
  rng_.seed(mix_seed(seed, kGoalStream));
  bank_.reset(mix_seed(seed, kDtaciStream));
  history_.clear();
  events_.clear();
  t_ = 0;
  outcome_ = Outcome::Running;
  started_ = true;
  refresh_predictions();
  last_intrusion_ = max_intrusion(robot_.position, robot_.radius, humans_, current_predictions(), config_.buffer);
  return observation();
}

Observation CrowdEnv::observation() const { return {robot_, humans_, current_predictions()}; }

Vec2 CrowdEnv::random_arena_point() { return uniform_point(rng_, config_.world.arena_half_extent); }

void CrowdEnv::advance_humans() {
  const std::vector<Vec2> velocities = pedestrian_velocities(humans_, config_.world);
  for (std::size_t h = 0; h < humans_.size(); ++h) {
    humans_[h].velocity = velocities[h];
    humans_[h].position += velocities[h] * config_.world.dt;
  }
}

void CrowdEnv::resample_goals() {
  const auto& w = config_.world;
  const bool periodic = t_ % w.goal_resample_period == 0;
  for (AgentState& human : humans_) {
    // Every human consumes the same number of draws so the stream stays
    // aligned regardless of which goals change.
    const double u = uniform(rng_, 0.0, 1.0);
    const Vec2 candidate = uniform_point(rng_, w.arena_half_extent - human.radius);
    const bool arrived = distance(human.position, human.goal) < human.radius;
    if (arrived || (periodic && u < w.goal_resample_prob)) human.goal = candidate;
  }
}

void CrowdEnv::refresh_predictions() {
  const int horizon = config_.horizon;
  const double dt = config_.world.dt;

  // Score the predictions issued k + 1 steps ago against where humans are now.
  events_.clear();
  for (int k = 0; k < horizon; ++k) {
    const int age = k + 1;
    if (static_cast<int>(history_.size()) < age) break;
    const auto& issued = history_[history_.size() - static_cast<std::size_t>(age)];
    for (std::size_t h = 0; h < humans_.size(); ++h) {
      const double actual = prediction_error(issued[h].points[k], humans_[h].position);
      const double radius = issued[h].radii[k];
      events_.push_back({static_cast<int>(h), k, actual, radius, radius >= actual});
      bank_.observe_and_update(static_cast<int>(h), k, actual);
    }
  }

  std::vector<PredictionSet> fresh(humans_.size());
  for (std::size_t h = 0; h < humans_.size(); ++h) {
    fresh[h].points = predictor_->predict(humans_[h], horizon, dt);
    fresh[h].radii.resize(static_cast<std::size_t>(horizon));
    for (int k = 0; k < horizon; ++k) fresh[h].radii[k] = bank_.sample_radius(static_cast<int>(h), k);
  }
  history_.push_back(std::move(fresh));
  while (static_cast<int>(history_.size()) > horizon) history_.pop_front();
}

StepResult CrowdEnv::step(const Vec2& action) {
  if (!started_) throw UsageError("step called before reset");
  if (done()) throw UsageError("step called after the episode ended");
  if (!action.finite()) throw std::invalid_argument("step: action must be finite");

  const auto& w = config_.world;
  const double d_before = distance(robot_.position, robot_.goal);

  robot_.velocity = clamp_norm(action, robot_.v_max);
  robot_.position += robot_.velocity * w.dt;
  advance_humans();
  ++t_;
  resample_goals();
  refresh_predictions();

  StepResult r;
  bool collided = false;
  for (const AgentState& human : humans_) {
    if (distance(robot_.position, human.position) < robot_.radius + human.radius) {
      collided = true;
      break;
    }
  }
  if (collided) {
    r.outcome = Outcome::Collision;
    r.reward = w.reward.collision;
  } else if (check_goal(robot_, w.reward.goal_tolerance)) {
    r.outcome = Outcome::Success;
    r.reward = w.reward.success;
  } else {
    r.outcome = t_ >= w.max_steps ? Outcome::Timeout : Outcome::Running;
    r.reward = w.reward.potential_weight * (d_before - distance(robot_.position, robot_.goal));
  }
  outcome_ = r.outcome;
  r.done = r.outcome != Outcome::Running;

  last_intrusion_ = max_intrusion(robot_.position, robot_.radius, humans_, current_predictions(), config_.buffer);
  r.intrusion = last_intrusion_;
  r.cost = intrusion_cost(last_intrusion_, config_.buffer);
  r.observation = observation();
  return r;
}

}  // namespace crowdnav
