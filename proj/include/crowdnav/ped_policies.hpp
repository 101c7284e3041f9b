#pragma once

#include <span>
#include <vector>

#include "crowdnav/agent.hpp"
#include "crowdnav/config.hpp"

namespace crowdnav {

/// Directed line used as an ORCA half-plane: velocities on the left of
/// `direction` through `point` are permitted.
struct OrcaLine {
  Vec2 point;
  Vec2 direction;
};

/// ORCA half-planes induced on `self` by every neighbor within
/// `params.neighbor_dist`. Neighbors are taken in the given order.
std::vector<OrcaLine> orca_constraints(const AgentState& self, std::span<const AgentState> neighbors,
                                       const OrcaParams& params, double dt);

/// Collision-avoiding velocity for `self`: the velocity closest to the
/// preferred velocity inside all ORCA half-planes and the v_max disc, or the
/// least-violating velocity when the half-planes have no common point.
Vec2 orca_velocity(const AgentState& self, std::span<const AgentState> neighbors, const OrcaParams& params,
                   double dt);

/// Velocity satisfying `lines` and ‖v‖ ≤ max_speed closest to `preferred`,
/// falling back to the minimal-violation solution. Exposed for tests.
Vec2 solve_orca_program(std::span<const OrcaLine> lines, double max_speed, const Vec2& preferred);

/// Social force acting on `self`: goal-directed relaxation plus exponential
/// repulsion from each neighbor.
Vec2 sf_force(const AgentState& self, std::span<const AgentState> neighbors, const SfParams& params, double dt);

/// Velocity after integrating the social force over `dt`, clamped to v_max.
/// Coincident centers repel along +x.
Vec2 sf_velocity(const AgentState& self, std::span<const AgentState> neighbors, const SfParams& params, double dt);

}  // namespace crowdnav
