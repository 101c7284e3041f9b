#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "crowdnav/config.hpp"

namespace crowdnav {

/// State of the M adaptive-conformal experts tracking one (human, horizon)
/// error stream.
struct ExpertState {
  std::vector<double> delta_hat;
  std::vector<double> weights;
  std::vector<double> probs;

  bool operator==(const ExpertState&) const = default;
};

/// All experts start at `initial` with uniform weights.
ExpertState make_expert_state(double initial, std::size_t num_experts);

/// Quantile (pinball) loss at level alpha: alpha * (actual - estimate) when
/// the estimate undershoots, (1 - alpha) * (estimate - actual) otherwise.
double pinball_loss(double actual, double estimate, double alpha);

/// One adaptive step for expert m: raise the estimate by (1 - alpha) * gamma on
/// a miss, lower it by alpha * gamma on a cover. Clamped at 0. Returns the new
/// estimate.
double update_expert(ExpertState& state, std::size_t m, double actual, const DtaciConfig& config);

/// Exponential reweighting of the experts by pinball loss with a uniform
/// mixing floor sigma / M, then renormalization into probs.
void update_weights(ExpertState& state, double actual, const DtaciConfig& config);

/// Inverse-CDF draw of an expert index from `state.probs` for u in [0, 1).
std::size_t sample_expert(const ExpertState& state, double u);

/// Grid of ExpertState indexed by (human, horizon step). Horizon steps are
/// 0-based here: index k tracks the (k + 1)-step-ahead error.
class EstimatorBank {
 public:
  EstimatorBank(DtaciConfig config, int humans, int horizon, std::uint64_t seed);

  /// Restores every expert to the configured initial errors and reseeds.
  void reset(std::uint64_t seed);

  int humans() const { return humans_; }
  int horizon() const { return horizon_; }
  const DtaciConfig& config() const { return config_; }
  const ExpertState& state(int h, int k) const { return states_[index(h, k)]; }

  /// Draws one expert by its probability and returns that expert's estimate.
  double sample_radius(int h, int k);

  /// Feeds one realized error: every expert's estimate moves, then the
  /// weights are refreshed from the losses of the moved estimates.
  void observe_and_update(int h, int k, double actual);

 private:
  std::size_t index(int h, int k) const;

  DtaciConfig config_;
  int humans_;
  int horizon_;
  std::vector<ExpertState> states_;
  std::mt19937_64 rng_;
};

}  // namespace crowdnav
