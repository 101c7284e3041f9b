#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace crowdnav {

/// Planar vector in meters (positions) or meters per second (velocities).
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2() = default;
  constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

  constexpr Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  constexpr Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Vec2& operator-=(const Vec2& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr Vec2& operator*=(double s) {
    x *= s;
    y *= s;
    return *this;
  }
  constexpr bool operator==(const Vec2&) const = default;

  double norm() const { return std::hypot(x, y); }
  constexpr double squared_norm() const { return x * x + y * y; }
  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

constexpr Vec2 operator*(double s, const Vec2& v) { return v * s; }
constexpr double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
/// z-component of the 3D cross product.
constexpr double det(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

/// Scales `v` down so its length does not exceed `max_norm`.
inline Vec2 clamp_norm(const Vec2& v, double max_norm) {
  const double n = v.norm();
  if (n > max_norm && n > 0.0) return v * (max_norm / n);
  return v;
}

/// Physical state of one disc-shaped agent (robot or pedestrian).
struct AgentState {
  Vec2 position;
  Vec2 velocity;
  double radius = 0.3;
  Vec2 goal;
  double v_max = 1.0;

  bool operator==(const AgentState&) const = default;
};

/// Preferred velocity toward the goal at full speed, slowed so the agent
/// lands on the goal instead of overshooting it within one step.
inline Vec2 preferred_velocity(const AgentState& agent, double dt) {
  const Vec2 to_goal = agent.goal - agent.position;
  const double d = to_goal.norm();
  if (d <= 0.0) return {};
  const double speed = std::min(agent.v_max, d / dt);
  return to_goal * (speed / d);
}

struct ScenarioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UsageError : std::logic_error {
  using std::logic_error::logic_error;
};

struct LoadError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace crowdnav
