#include "crowdnav/predictor.hpp"

namespace crowdnav {

std::vector<Vec2> predict_cv(const AgentState& human, int horizon, double dt) {
  if (horizon < 1) throw std::invalid_argument("prediction horizon must be >= 1");
  std::vector<Vec2> points;
  points.reserve(static_cast<std::size_t>(horizon));
  for (int k = 1; k <= horizon; ++k) {
    points.push_back(human.position + human.velocity * (static_cast<double>(k) * dt));
  }
  return points;
}

}  // namespace crowdnav
