#include "crowdnav/ped_policies.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace crowdnav {

namespace {

constexpr double kEpsilon = 1e-9;

Vec2 normalized(const Vec2& v) {
  const double n = v.norm();
  return n > 0.0 ? v / n : Vec2{};
}

// Optimizes along line `line_no` subject to lines [0, line_no) and the speed
// disc. With `direction_opt` the objective is the direction `opt`; otherwise
// the point on the feasible segment closest to `opt`.
bool program_on_line(std::span<const OrcaLine> lines, std::size_t line_no, double radius, const Vec2& opt,
                     bool direction_opt, Vec2& result) {
  const OrcaLine& line = lines[line_no];
  const double dot_product = dot(line.point, line.direction);
  const double discriminant = dot_product * dot_product + radius * radius - line.point.squared_norm();
  if (discriminant < 0.0) return false;

  const double sqrt_disc = std::sqrt(discriminant);
  double t_left = -dot_product - sqrt_disc;
  double t_right = -dot_product + sqrt_disc;

  for (std::size_t i = 0; i < line_no; ++i) {
    const double denominator = det(line.direction, lines[i].direction);
    const double numerator = det(lines[i].direction, line.point - lines[i].point);
    if (std::fabs(denominator) <= kEpsilon) {
      if (numerator < 0.0) return false;
      continue;
    }
    const double t = numerator / denominator;
    if (denominator >= 0.0) {
      t_right = std::min(t_right, t);
    } else {
      t_left = std::max(t_left, t);
    }
    if (t_left > t_right) return false;
  }

  if (direction_opt) {
    const double along = dot(opt, line.direction);
    if (std::fabs(along) <= kEpsilon) {
      // Both ends are optimal: take smaller x, then smaller y.
      const Vec2 a = line.point + line.direction * t_left;
      const Vec2 b = line.point + line.direction * t_right;
      result = (a.x < b.x || (a.x == b.x && a.y <= b.y)) ? a : b;
    } else if (along > 0.0) {
      result = line.point + line.direction * t_right;
    } else {
      result = line.point + line.direction * t_left;
    }
  } else {
    const double t = dot(line.direction, opt - line.point);
    result = line.point + line.direction * std::clamp(t, t_left, t_right);
  }
  return true;
}

// Returns the index of the first line that could not be satisfied, or
// lines.size() on success.
std::size_t program_2d(std::span<const OrcaLine> lines, double radius, const Vec2& opt, bool direction_opt,
                       Vec2& result) {
  if (direction_opt) {
    result = opt * radius;
  } else if (opt.squared_norm() > radius * radius) {
    result = normalized(opt) * radius;
  } else {
    result = opt;
  }

  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (det(lines[i].direction, lines[i].point - result) > 0.0) {
      const Vec2 previous = result;
      if (!program_on_line(lines, i, radius, opt, direction_opt, result)) {
        result = previous;
        return i;
      }
    }
  }
  return lines.size();
}

// Minimizes the maximum violation over lines [begin, end) when the program is
// infeasible.
void program_3d(std::span<const OrcaLine> lines, std::size_t begin, double radius, Vec2& result) {
  double violation = 0.0;
  for (std::size_t i = begin; i < lines.size(); ++i) {
    if (det(lines[i].direction, lines[i].point - result) <= violation) continue;

    std::vector<OrcaLine> projected;
    projected.reserve(i);
    for (std::size_t j = 0; j < i; ++j) {
      OrcaLine line;
      const double determinant = det(lines[i].direction, lines[j].direction);
      if (std::fabs(determinant) <= kEpsilon) {
        if (dot(lines[i].direction, lines[j].direction) > 0.0) continue;
        line.point = (lines[i].point + lines[j].point) * 0.5;
      } else {
        line.point = lines[i].point +
                     lines[i].direction * (det(lines[j].direction, lines[i].point - lines[j].point) / determinant);
      }
      line.direction = normalized(lines[j].direction - lines[i].direction);
      projected.push_back(line);
    }

    const Vec2 previous = result;
    const Vec2 inward{-lines[i].direction.y, lines[i].direction.x};
    if (program_2d(projected, radius, inward, true, result) < projected.size()) {
      result = previous;
    }
    violation = det(lines[i].direction, lines[i].point - result);
  }
}

}  // namespace

std::vector<OrcaLine> orca_constraints(const AgentState& self, std::span<const AgentState> neighbors,
                                       const OrcaParams& params, double dt) {
  const double range_sq = params.neighbor_dist * params.neighbor_dist;

  // Nearest neighbors first; ties keep input order.
  std::vector<std::size_t> order;
  std::vector<double> dist_sq(neighbors.size());
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    dist_sq[i] = (neighbors[i].position - self.position).squared_norm();
    if (dist_sq[i] < range_sq) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist_sq[a] < dist_sq[b]; });

  const double inv_horizon = 1.0 / params.time_horizon;
  std::vector<OrcaLine> lines;
  lines.reserve(order.size());
  for (std::size_t idx : order) {
    const AgentState& other = neighbors[idx];
    const Vec2 rel_pos = other.position - self.position;
    const Vec2 rel_vel = self.velocity - other.velocity;
    const double d_sq = rel_pos.squared_norm();
    const double combined_radius = self.radius + other.radius;
    const double combined_radius_sq = combined_radius * combined_radius;

    OrcaLine line;
    Vec2 u;
    if (d_sq > combined_radius_sq) {
      const Vec2 w = rel_vel - rel_pos * inv_horizon;
      const double w_len_sq = w.squared_norm();
      const double dot1 = dot(w, rel_pos);
      if (dot1 < 0.0 && dot1 * dot1 > combined_radius_sq * w_len_sq) {
        // Cut-off circle.
        const double w_len = std::sqrt(w_len_sq);
        const Vec2 unit_w = w / w_len;
        line.direction = {unit_w.y, -unit_w.x};
        u = unit_w * (combined_radius * inv_horizon - w_len);
      } else {
        const double leg = std::sqrt(d_sq - combined_radius_sq);
        if (det(rel_pos, w) > 0.0) {
          line.direction = Vec2{rel_pos.x * leg - rel_pos.y * combined_radius,
                                rel_pos.x * combined_radius + rel_pos.y * leg} /
                           d_sq;
        } else {
          line.direction = -Vec2{rel_pos.x * leg + rel_pos.y * combined_radius,
                                 -rel_pos.x * combined_radius + rel_pos.y * leg} /
                           d_sq;
        }
        u = line.direction * dot(rel_vel, line.direction) - rel_vel;
      }
    } else {
      // Already overlapping: resolve within one step.
      const double inv_dt = 1.0 / dt;
      const Vec2 w = rel_vel - rel_pos * inv_dt;
      const double w_len = w.norm();
      const Vec2 unit_w = w_len > 0.0 ? w / w_len : Vec2{1.0, 0.0};
      line.direction = {unit_w.y, -unit_w.x};
      u = unit_w * (combined_radius * inv_dt - w_len);
    }
    line.point = self.velocity + u * params.responsibility;
    lines.push_back(line);
  }
  return lines;
}

Vec2 solve_orca_program(std::span<const OrcaLine> lines, double max_speed, const Vec2& preferred) {
  Vec2 result;
  const std::size_t failed = program_2d(lines, max_speed, preferred, false, result);
  if (failed < lines.size()) program_3d(lines, failed, max_speed, result);
  return clamp_norm(result, max_speed);
}

Vec2 orca_velocity(const AgentState& self, std::span<const AgentState> neighbors, const OrcaParams& params,
                   double dt) {
  const auto lines = orca_constraints(self, neighbors, params, dt);
  return solve_orca_program(lines, self.v_max, preferred_velocity(self, dt));
}

Vec2 sf_force(const AgentState& self, std::span<const AgentState> neighbors, const SfParams& params, double dt) {
  Vec2 force = (preferred_velocity(self, dt) - self.velocity) / params.relaxation_time;
  for (const AgentState& other : neighbors) {
    const Vec2 away = self.position - other.position;
    const double d = away.norm();
    const Vec2 n = d > 0.0 ? away / d : Vec2{1.0, 0.0};
    force += n * (params.repulsion_strength *
                  std::exp((self.radius + other.radius - d) / params.repulsion_range));
  }
  return force;
}

Vec2 sf_velocity(const AgentState& self, std::span<const AgentState> neighbors, const SfParams& params, double dt) {
  return clamp_norm(self.velocity + sf_force(self, neighbors, params, dt) * dt, self.v_max);
}

}  // namespace crowdnav
