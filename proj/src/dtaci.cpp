#include "crowdnav/dtaci.hpp"

#include <cmath>
#include <stdexcept>

namespace crowdnav {

ExpertState make_expert_state(double initial, std::size_t num_experts) {
  ExpertState s;
  s.delta_hat.assign(num_experts, initial);
  s.weights.assign(num_experts, 1.0);
  s.probs.assign(num_experts, 1.0 / static_cast<double>(num_experts));
  return s;
}

double pinball_loss(double actual, double estimate, double alpha) {
  if (actual >= estimate) return alpha * (actual - estimate);
  return (1.0 - alpha) * (estimate - actual);
}

double update_expert(ExpertState& state, std::size_t m, double actual, const DtaciConfig& config) {
  double& estimate = state.delta_hat.at(m);
  const double err = estimate < actual ? 1.0 : 0.0;
  estimate = std::max(0.0, estimate - config.learning_rates.at(m) * (config.alpha - err));
  return estimate;
}

void update_weights(ExpertState& state, double actual, const DtaciConfig& config) {
  const std::size_t n = state.weights.size();
  std::vector<double> scaled(n);
  double total = 0.0;
  for (std::size_t m = 0; m < n; ++m) {
    scaled[m] = state.weights[m] * std::exp(-config.eta * pinball_loss(actual, state.delta_hat[m], config.alpha));
    total += scaled[m];
  }
  if (!(total > 0.0)) throw std::logic_error("dtaci: expert weights collapsed to zero");

  const double floor = config.sigma / static_cast<double>(n);
  double weight_sum = 0.0;
  for (std::size_t m = 0; m < n; ++m) {
    state.weights[m] = (1.0 - config.sigma) * scaled[m] / total + floor;
    weight_sum += state.weights[m];
  }
  for (std::size_t m = 0; m < n; ++m) state.probs[m] = state.weights[m] / weight_sum;
}

EstimatorBank::EstimatorBank(DtaciConfig config, int humans, int horizon, std::uint64_t seed)
    : config_(std::move(config)), humans_(humans), horizon_(horizon) {
  if (humans < 0 || horizon < 1) throw std::invalid_argument("dtaci: bank needs humans >= 0 and horizon >= 1");
  if (static_cast<int>(config_.initial_errors.size()) < horizon) {
    throw std::invalid_argument("dtaci: one initial error per horizon step is required");
  }
  reset(seed);
}

void EstimatorBank::reset(std::uint64_t seed) {
  states_.clear();
  states_.reserve(static_cast<std::size_t>(humans_ * horizon_));
  for (int h = 0; h < humans_; ++h) {
    for (int k = 0; k < horizon_; ++k) {
      states_.push_back(make_expert_state(config_.initial_errors[k], config_.learning_rates.size()));
    }
  }
  rng_.seed(seed);
}

std::size_t EstimatorBank::index(int h, int k) const {
  if (h < 0 || h >= humans_ || k < 0 || k >= horizon_) throw std::out_of_range("dtaci: (h, k) outside the bank");
  return static_cast<std::size_t>(h * horizon_ + k);
}

std::size_t sample_expert(const ExpertState& state, double u) {
  double cumulative = 0.0;
  for (std::size_t m = 0; m < state.probs.size(); ++m) {
    cumulative += state.probs[m];
    if (u < cumulative) return m;
  }
  // Rounding left u beyond the last cumulative sum: take the last expert
  // that carries probability mass.
  for (std::size_t m = state.probs.size(); m-- > 0;) {
    if (state.probs[m] > 0.0) return m;
  }
  return state.probs.size() - 1;
}

double EstimatorBank::sample_radius(int h, int k) {
  const ExpertState& s = states_[index(h, k)];
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
  return s.delta_hat[sample_expert(s, u)];
}

void EstimatorBank::observe_and_update(int h, int k, double actual) {
  ExpertState& s = states_[index(h, k)];
  for (std::size_t m = 0; m < s.delta_hat.size(); ++m) update_expert(s, m, actual, config_);
  update_weights(s, actual, config_);
}

}  // namespace crowdnav
