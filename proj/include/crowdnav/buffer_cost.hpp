#pragma once

#include <span>
#include <vector>

#include "crowdnav/agent.hpp"
#include "crowdnav/config.hpp"
#include "crowdnav/predictor.hpp"

namespace crowdnav {

enum class IntrusionSource { None, CurrentPosition, Prediction };

/// Deepest penetration of the robot center into any human buffer.
struct IntrusionReport {
  double depth = 0.0;
  IntrusionSource source = IntrusionSource::None;
  int human = -1;
  /// 0-based prediction step when source is Prediction, -1 otherwise.
  int step = -1;

  bool operator==(const IntrusionReport&) const = default;
};

struct BufferRadii {
  double current = 0.0;
  std::vector<double> predicted;
};

/// Buffer thresholds around one human: r_ego + r_h + r_disc for the current
/// position and r_ego + r_h + radius_k for each predicted position.
BufferRadii buffer_radii(double robot_radius, double human_radius, const BufferSpec& spec,
                         std::span<const double> radii);

/// Maximum intrusion depth max(0, r - ‖robot - center‖) over the current
/// buffer and the first k_prime prediction buffers of every human. Ties keep
/// the first buffer in (human, current, step 0, step 1, ...) order.
IntrusionReport max_intrusion(const Vec2& robot_position, double robot_radius, std::span<const AgentState> humans,
                              std::span<const PredictionSet> predictions, const BufferSpec& spec);

inline double intrusion_cost(const IntrusionReport& report, const BufferSpec& spec) { return spec.mu * report.depth; }

}  // namespace crowdnav
