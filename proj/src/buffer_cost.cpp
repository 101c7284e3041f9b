#include "crowdnav/buffer_cost.hpp"

#include <stdexcept>

namespace crowdnav {

BufferRadii buffer_radii(double robot_radius, double human_radius, const BufferSpec& spec,
                         std::span<const double> radii) {
  const double contact = robot_radius + human_radius;
  BufferRadii out;
  out.current = contact + spec.r_disc;
  out.predicted.reserve(radii.size());
  for (double r : radii) out.predicted.push_back(contact + r);
  return out;
}

IntrusionReport max_intrusion(const Vec2& robot_position, double robot_radius, std::span<const AgentState> humans,
                              std::span<const PredictionSet> predictions, const BufferSpec& spec) {
  if (predictions.size() != humans.size()) throw std::invalid_argument("max_intrusion: one prediction set per human");

  IntrusionReport report;
  auto consider = [&](double threshold, const Vec2& center, IntrusionSource source, int h, int k) {
    const double depth = threshold - distance(robot_position, center);
    if (depth > report.depth) report = {depth, source, h, k};
  };

  for (std::size_t h = 0; h < humans.size(); ++h) {
    const PredictionSet& pred = predictions[h];
    const auto steps = static_cast<std::size_t>(spec.k_prime);
    if (pred.points.size() < steps || pred.radii.size() < steps) {
      throw std::invalid_argument("max_intrusion: prediction set shorter than k_prime");
    }
    const double contact = robot_radius + humans[h].radius;
    const int hi = static_cast<int>(h);
    consider(contact + spec.r_disc, humans[h].position, IntrusionSource::CurrentPosition, hi, -1);
    for (std::size_t k = 0; k < steps; ++k) {
      consider(contact + pred.radii[k], pred.points[k], IntrusionSource::Prediction, hi, static_cast<int>(k));
    }
  }
  return report;
}

}  // namespace crowdnav
