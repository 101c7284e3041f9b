#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "crowdnav/agent.hpp"
#include "crowdnav/config.hpp"
#include "crowdnav/sim.hpp"

namespace crowdnav {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MaskMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MaskVector = Eigen::Array<bool, Eigen::Dynamic, 1>;

constexpr int kEgoFeatureDim = 6;

/// Length of one human's feature row for a K-step prediction horizon:
/// relative position (2), relative velocity (2), radius (1), K relative
/// predicted points (2K), K error radii (K).
constexpr int human_feature_dim(int horizon) { return 5 + 3 * horizon; }

/// Robot-centric frame: origin at the robot, x-axis toward its goal.
struct Frame {
  Vec2 origin;
  double cos_theta = 1.0;
  double sin_theta = 0.0;

  Vec2 rotate_to_local(const Vec2& v) const { return {cos_theta * v.x + sin_theta * v.y, -sin_theta * v.x + cos_theta * v.y}; }
  Vec2 rotate_to_world(const Vec2& v) const { return {cos_theta * v.x - sin_theta * v.y, sin_theta * v.x + cos_theta * v.y}; }
  Vec2 point_to_local(const Vec2& p) const { return rotate_to_local(p - origin); }
};

/// Observation flattened into network inputs.
struct FeatureEncoding {
  RowMatrix humans;     // H x human_feature_dim(K)
  Eigen::VectorXd ego;  // velocity (2), goal offset (2), v_max, radius
  Frame frame;
  double v_max = 1.0;
};

FeatureEncoding encode(const Observation& obs);

struct NetworkShape {
  int human_dim = human_feature_dim(5);
  int ego_dim = kEgoFeatureDim;
  int embed = 32;
  int attention = 32;
  int trunk = 64;

  static NetworkShape from(const ExperimentConfig& config);
  bool operator==(const NetworkShape&) const = default;
};

/// Named row-major tensors packed into one flat array.
class ParamLayout {
 public:
  struct Entry {
    std::string name;
    int rows = 0;
    int cols = 0;
    std::size_t offset = 0;
  };

  std::size_t add(const std::string& name, int rows, int cols);
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return size_; }

 private:
  std::vector<Entry> entries_;
  std::size_t size_ = 0;
};

/// Layout of the actor + reward-critic block (shared encoder and trunk,
/// separate heads) and of the independent cost critic.
ParamLayout shared_layout(const NetworkShape& shape);
ParamLayout cost_layout(const NetworkShape& shape);

struct NetworkParams {
  NetworkShape shape;
  std::vector<double> shared;
  std::vector<double> cost;
  /// Exploration noise; never trained.
  double fixed_action_std = 0.2;
};

/// Glorot-uniform weights, zero biases, actor head scaled by 0.01.
NetworkParams init_params(const NetworkShape& shape, double fixed_action_std, std::uint64_t seed);

struct Gradients {
  std::vector<double> shared;
  std::vector<double> cost;

  static Gradients zeros_like(const NetworkParams& p) {
    return {std::vector<double>(p.shared.size(), 0.0), std::vector<double>(p.cost.size(), 0.0)};
  }
};

/// Rectifier on/off pattern of one encoder pass.
struct EncoderGates {
  MaskMatrix embed;
  MaskVector ego;
  MaskVector trunk1;
  MaskVector trunk2;
};

/// Intermediate values of one encoder pass kept for the backward sweep.
struct EncoderCache {
  RowMatrix x, embed, q, k, v, attn, z, keys, vals;
  Eigen::VectorXd ego_in, ego, query, pool_weights, pooled, trunk_in, h1, h2;
  EncoderGates gates;
};

struct ForwardCache {
  EncoderCache actor;
  EncoderCache cost;
  Eigen::Vector2d head_pre;
  double v_max = 1.0;
};

struct PolicyOutput {
  Vec2 mean;  // in the robot-centric frame
  double value_r = 0.0;
  double value_c = 0.0;
};

/// Gates to impose instead of the sign of each pre-activation. Used by the
/// finite-difference checks to stay on one linear piece of the network.
struct GateReplay {
  const EncoderGates* actor = nullptr;
  const EncoderGates* cost = nullptr;
};

/// Attention-pooled actor-critic pass. Permutation invariant in the humans.
/// The action mean is v_max tanh(|z|) z / |z|, so its norm stays below v_max.
PolicyOutput forward(const NetworkParams& params, const FeatureEncoding& features, ForwardCache* cache = nullptr,
                     const GateReplay& replay = {});

/// Adjoint of the scalar loss with respect to the three outputs.
struct OutputAdjoint {
  Eigen::Vector2d d_mean = Eigen::Vector2d::Zero();
  double d_value_r = 0.0;
  double d_value_c = 0.0;
};

/// Reverse sweep of `forward`; adds dLoss/dParams into `grads`.
void backward(const NetworkParams& params, const ForwardCache& cache, const OutputAdjoint& adjoint, Gradients& grads);

/// Log-density of an isotropic 2D Gaussian.
double gaussian_log_prob(const Vec2& action, const Vec2& mean, double std);

/// Differential entropy of the isotropic 2D Gaussian, ln(2 pi e std^2).
double gaussian_entropy(double std);

struct ActionSample {
  Vec2 action;
  double log_prob = 0.0;
};

ActionSample sample_action(const Vec2& mean, double std, std::mt19937_64& rng);
ActionSample sample_action(const Vec2& mean, double std, std::uint64_t seed);

/// Largest absolute parameter over both blocks.
double max_abs_param(const NetworkParams& params);

}  // namespace crowdnav
