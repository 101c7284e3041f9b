#pragma once

#include <memory>
#include <vector>

#include "crowdnav/agent.hpp"

namespace crowdnav {

/// K predicted future positions of one human and the error radius attached
/// to each of them.
struct PredictionSet {
  std::vector<Vec2> points;
  std::vector<double> radii;

  int horizon() const { return static_cast<int>(points.size()); }
  bool operator==(const PredictionSet&) const = default;
};

/// Positions `position + velocity * k * dt` for k = 1..K.
std::vector<Vec2> predict_cv(const AgentState& human, int horizon, double dt);

/// Euclidean distance between a predicted and a realized position.
inline double prediction_error(const Vec2& predicted, const Vec2& actual) { return distance(predicted, actual); }

/// Trajectory predictor interface; implementations must be deterministic.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::vector<Vec2> predict(const AgentState& human, int horizon, double dt) const = 0;
};

class ConstantVelocityPredictor final : public Predictor {
 public:
  std::vector<Vec2> predict(const AgentState& human, int horizon, double dt) const override {
    return predict_cv(human, horizon, dt);
  }
};

}  // namespace crowdnav
