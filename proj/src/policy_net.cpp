#include "crowdnav/policy_net.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace crowdnav {

namespace {

using MatMap = Eigen::Map<const RowMatrix>;
using GradMat = Eigen::Map<RowMatrix>;
using VecMap = Eigen::Map<const Eigen::VectorXd>;
using GradVec = Eigen::Map<Eigen::VectorXd>;

struct TensorDims {
  const char* name;
  int rows;
  int cols;
};

enum EncoderTensor {
  kEmbedW,
  kEmbedB,
  kQueryW,
  kKeyW,
  kValueW,
  kEgoW,
  kEgoB,
  kPoolQueryW,
  kPoolKeyW,
  kPoolValueW,
  kTrunk1W,
  kTrunk1B,
  kTrunk2W,
  kTrunk2B,
  kEncoderTensors
};

std::array<TensorDims, kEncoderTensors> encoder_dims(const NetworkShape& s) {
  return {{
      {"embed.w", s.embed, s.human_dim},
      {"embed.b", s.embed, 1},
      {"self_attn.query", s.attention, s.embed},
      {"self_attn.key", s.attention, s.embed},
      {"self_attn.value", s.embed, s.embed},
      {"ego.w", s.embed, s.ego_dim},
      {"ego.b", s.embed, 1},
      {"pool.query", s.attention, s.embed},
      {"pool.key", s.attention, s.embed},
      {"pool.value", s.embed, s.embed},
      {"trunk1.w", s.trunk, 2 * s.embed},
      {"trunk1.b", s.trunk, 1},
      {"trunk2.w", s.trunk, s.trunk},
      {"trunk2.b", s.trunk, 1},
  }};
}

struct EncoderOffsets {
  std::array<std::size_t, kEncoderTensors> at{};
  std::size_t end = 0;
};

EncoderOffsets encoder_offsets(const NetworkShape& s) {
  EncoderOffsets o;
  std::size_t cursor = 0;
  const auto dims = encoder_dims(s);
  for (std::size_t i = 0; i < dims.size(); ++i) {
    o.at[i] = cursor;
    cursor += static_cast<std::size_t>(dims[i].rows) * static_cast<std::size_t>(dims[i].cols);
  }
  o.end = cursor;
  return o;
}

// Heads follow the encoder: actor (2 x T, 2) then value (1 x T, 1) in the
// shared block; value only in the cost block.
struct HeadOffsets {
  std::size_t actor_w = 0, actor_b = 0, value_w = 0, value_b = 0;
};

HeadOffsets shared_heads(const NetworkShape& s) {
  const std::size_t base = encoder_offsets(s).end;
  const auto t = static_cast<std::size_t>(s.trunk);
  return {base, base + 2 * t, base + 2 * t + 2, base + 3 * t + 2};
}

HeadOffsets cost_heads(const NetworkShape& s) {
  const std::size_t base = encoder_offsets(s).end;
  const auto t = static_cast<std::size_t>(s.trunk);
  return {0, 0, base, base + t};
}

MatMap mat(const double* p, std::size_t offset, int rows, int cols) { return MatMap(p + offset, rows, cols); }
VecMap vec(const double* p, std::size_t offset, int n) { return VecMap(p + offset, n); }

void softmax_rows(RowMatrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double top = m.row(i).maxCoeff();
    m.row(i) = (m.row(i).array() - top).exp().matrix();
    m.row(i) /= m.row(i).sum();
  }
}

// Returns false when any pre-activation is non-finite; the rectifiers would
// otherwise mask NaN to zero.
bool encoder_forward(const double* p, const NetworkShape& s, const FeatureEncoding& f, EncoderCache& c,
                     const EncoderGates* replay) {
  const EncoderOffsets o = encoder_offsets(s);
  const auto d = encoder_dims(s);
  auto W = [&](EncoderTensor t) { return mat(p, o.at[t], d[t].rows, d[t].cols); };
  auto B = [&](EncoderTensor t) { return vec(p, o.at[t], d[t].rows); };
  const double scale = 1.0 / std::sqrt(static_cast<double>(s.attention));
  const Eigen::Index humans = f.humans.rows();

  bool finite = true;
  c.x = f.humans;
  c.embed = (c.x * W(kEmbedW).transpose()).rowwise() + B(kEmbedB).transpose();
  finite &= c.embed.allFinite();
  if (replay) {
    c.gates.embed = replay->embed;
  } else {
    c.gates.embed = c.embed.array() > 0.0;
  }
  c.embed = c.gates.embed.select(c.embed, 0.0);

  c.ego_in = f.ego;
  c.ego = W(kEgoW) * c.ego_in + B(kEgoB);
  finite &= c.ego.allFinite();
  c.gates.ego = replay ? replay->ego : MaskVector(c.ego.array() > 0.0);
  c.ego = c.gates.ego.select(c.ego, 0.0);

  if (humans > 0) {
    c.q = c.embed * W(kQueryW).transpose();
    c.k = c.embed * W(kKeyW).transpose();
    c.v = c.embed * W(kValueW).transpose();
    c.attn = (c.q * c.k.transpose()) * scale;
    softmax_rows(c.attn);
    c.z = c.embed + c.attn * c.v;

    c.query = W(kPoolQueryW) * c.ego;
    c.keys = c.z * W(kPoolKeyW).transpose();
    c.vals = c.z * W(kPoolValueW).transpose();
    c.pool_weights = (c.keys * c.query) * scale;
    const double top = c.pool_weights.maxCoeff();
    c.pool_weights = (c.pool_weights.array() - top).exp().matrix();
    c.pool_weights /= c.pool_weights.sum();
    c.pooled = c.vals.transpose() * c.pool_weights;
  } else {
    c.pooled = Eigen::VectorXd::Zero(s.embed);
  }

  c.trunk_in.resize(2 * s.embed);
  c.trunk_in << c.pooled, c.ego;
  c.h1 = W(kTrunk1W) * c.trunk_in + B(kTrunk1B);
  finite &= c.h1.allFinite();
  c.gates.trunk1 = replay ? replay->trunk1 : MaskVector(c.h1.array() > 0.0);
  c.h1 = c.gates.trunk1.select(c.h1, 0.0);
  c.h2 = W(kTrunk2W) * c.h1 + B(kTrunk2B);
  finite &= c.h2.allFinite();
  c.gates.trunk2 = replay ? replay->trunk2 : MaskVector(c.h2.array() > 0.0);
  c.h2 = c.gates.trunk2.select(c.h2, 0.0);
  return finite;
}

void encoder_backward(const double* p, double* g, const NetworkShape& s, const EncoderCache& c,
                      const Eigen::VectorXd& d_h2) {
  const EncoderOffsets o = encoder_offsets(s);
  const auto d = encoder_dims(s);
  auto W = [&](EncoderTensor t) { return mat(p, o.at[t], d[t].rows, d[t].cols); };
  auto GW = [&](EncoderTensor t) { return GradMat(g + o.at[t], d[t].rows, d[t].cols); };
  auto GB = [&](EncoderTensor t) { return GradVec(g + o.at[t], d[t].rows); };
  const double scale = 1.0 / std::sqrt(static_cast<double>(s.attention));
  const Eigen::Index humans = c.x.rows();

  const Eigen::VectorXd d_pre2 = c.gates.trunk2.select(d_h2, 0.0);
  GW(kTrunk2W).noalias() += d_pre2 * c.h1.transpose();
  GB(kTrunk2B) += d_pre2;
  const Eigen::VectorXd d_pre1 = c.gates.trunk1.select(W(kTrunk2W).transpose() * d_pre2, 0.0);
  GW(kTrunk1W).noalias() += d_pre1 * c.trunk_in.transpose();
  GB(kTrunk1B) += d_pre1;
  const Eigen::VectorXd d_trunk_in = W(kTrunk1W).transpose() * d_pre1;
  const Eigen::VectorXd d_pooled = d_trunk_in.head(s.embed);
  Eigen::VectorXd d_ego = d_trunk_in.tail(s.embed);

  RowMatrix d_embed;
  if (humans > 0) {
    // Robot-query pooling.
    const RowMatrix d_vals = c.pool_weights * d_pooled.transpose();
    const Eigen::VectorXd d_weights = c.vals * d_pooled;
    const double mean = c.pool_weights.dot(d_weights);
    const Eigen::VectorXd d_scores = (c.pool_weights.array() * (d_weights.array() - mean)).matrix() * scale;
    const RowMatrix d_keys = d_scores * c.query.transpose();
    const Eigen::VectorXd d_query = c.keys.transpose() * d_scores;
    GW(kPoolQueryW).noalias() += d_query * c.ego.transpose();
    d_ego.noalias() += W(kPoolQueryW).transpose() * d_query;
    GW(kPoolKeyW).noalias() += d_keys.transpose() * c.z;
    GW(kPoolValueW).noalias() += d_vals.transpose() * c.z;
    RowMatrix d_z = d_keys * W(kPoolKeyW);
    d_z.noalias() += d_vals * W(kPoolValueW);

    // Self-attention with residual.
    d_embed = d_z;
    const RowMatrix d_attn = d_z * c.v.transpose();
    const RowMatrix d_v = c.attn.transpose() * d_z;
    RowMatrix d_logits(humans, humans);
    for (Eigen::Index i = 0; i < humans; ++i) {
      const double row_mean = c.attn.row(i).dot(d_attn.row(i));
      d_logits.row(i) = (c.attn.row(i).array() * (d_attn.row(i).array() - row_mean)).matrix() * scale;
    }
    const RowMatrix d_q = d_logits * c.k;
    const RowMatrix d_k = d_logits.transpose() * c.q;
    GW(kQueryW).noalias() += d_q.transpose() * c.embed;
    GW(kKeyW).noalias() += d_k.transpose() * c.embed;
    GW(kValueW).noalias() += d_v.transpose() * c.embed;
    d_embed.noalias() += d_q * W(kQueryW);
    d_embed.noalias() += d_k * W(kKeyW);
    d_embed.noalias() += d_v * W(kValueW);

    const RowMatrix d_pre_embed = c.gates.embed.select(d_embed, 0.0);
    GW(kEmbedW).noalias() += d_pre_embed.transpose() * c.x;
    GB(kEmbedB) += d_pre_embed.colwise().sum().transpose();
  }

  const Eigen::VectorXd d_pre_ego = c.gates.ego.select(d_ego, 0.0);
  GW(kEgoW).noalias() += d_pre_ego * c.ego_in.transpose();
  GB(kEgoB) += d_pre_ego;
}

void add_encoder(ParamLayout& layout, const NetworkShape& s) {
  for (const TensorDims& t : encoder_dims(s)) layout.add(t.name, t.rows, t.cols);
}

}  // namespace

FeatureEncoding encode(const Observation& obs) {
  const AgentState& robot = obs.robot;
  FeatureEncoding f;
  f.frame.origin = robot.position;
  const Vec2 to_goal = robot.goal - robot.position;
  const double goal_distance = to_goal.norm();
  if (goal_distance > 0.0) {
    f.frame.cos_theta = to_goal.x / goal_distance;
    f.frame.sin_theta = to_goal.y / goal_distance;
  }
  f.v_max = robot.v_max;

  const Vec2 ego_velocity = f.frame.rotate_to_local(robot.velocity);
  const Vec2 goal_offset = f.frame.rotate_to_local(to_goal);
  f.ego.resize(kEgoFeatureDim);
  f.ego << ego_velocity.x, ego_velocity.y, goal_offset.x, goal_offset.y, robot.v_max, robot.radius;

  const auto humans = static_cast<Eigen::Index>(obs.humans.size());
  if (obs.predictions.size() != obs.humans.size()) throw std::invalid_argument("encode: one prediction set per human");
  const int horizon = humans > 0 ? obs.predictions.front().horizon() : 0;
  f.humans.resize(humans, human_feature_dim(horizon));
  for (Eigen::Index h = 0; h < humans; ++h) {
    const AgentState& human = obs.humans[static_cast<std::size_t>(h)];
    const PredictionSet& pred = obs.predictions[static_cast<std::size_t>(h)];
    if (pred.horizon() != horizon || static_cast<int>(pred.radii.size()) != horizon) {
      throw std::invalid_argument("encode: prediction sets must share one horizon");
    }
    const Vec2 rel_pos = f.frame.point_to_local(human.position);
    const Vec2 rel_vel = f.frame.rotate_to_local(human.velocity - robot.velocity);
    auto row = f.humans.row(h);
    row(0) = rel_pos.x;
    row(1) = rel_pos.y;
    row(2) = rel_vel.x;
    row(3) = rel_vel.y;
    row(4) = human.radius;
    for (int k = 0; k < horizon; ++k) {
      const Vec2 point = f.frame.point_to_local(pred.points[static_cast<std::size_t>(k)]);
      row(5 + 2 * k) = point.x;
      row(6 + 2 * k) = point.y;
      row(5 + 2 * horizon + k) = pred.radii[static_cast<std::size_t>(k)];
    }
  }
  return f;
}

NetworkShape NetworkShape::from(const ExperimentConfig& config) {
  NetworkShape s;
  s.human_dim = human_feature_dim(config.horizon);
  s.embed = config.network.embed_dim;
  s.attention = config.network.attention_dim;
  s.trunk = config.network.trunk_dim;
  return s;
}

std::size_t ParamLayout::add(const std::string& name, int rows, int cols) {
  entries_.push_back({name, rows, cols, size_});
  size_ += static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  return entries_.back().offset;
}

ParamLayout shared_layout(const NetworkShape& shape) {
  ParamLayout l;
  add_encoder(l, shape);
  l.add("actor.w", 2, shape.trunk);
  l.add("actor.b", 2, 1);
  l.add("value.w", 1, shape.trunk);
  l.add("value.b", 1, 1);
  return l;
}

ParamLayout cost_layout(const NetworkShape& shape) {
  ParamLayout l;
  add_encoder(l, shape);
  l.add("value.w", 1, shape.trunk);
  l.add("value.b", 1, 1);
  return l;
}

NetworkParams init_params(const NetworkShape& shape, double fixed_action_std, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto fill = [&](const ParamLayout& layout, std::vector<double>& out) {
    out.assign(layout.size(), 0.0);
    for (const auto& e : layout.entries()) {
      if (e.cols == 1 && e.name.ends_with(".b")) continue;
      double limit = std::sqrt(6.0 / static_cast<double>(e.rows + e.cols));
      if (e.name == "actor.w") limit *= 0.01;
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (std::size_t i = 0; i < static_cast<std::size_t>(e.rows * e.cols); ++i) out[e.offset + i] = dist(rng);
    }
  };
  NetworkParams p;
  p.shape = shape;
  p.fixed_action_std = fixed_action_std;
  fill(shared_layout(shape), p.shared);
  fill(cost_layout(shape), p.cost);
  return p;
}

namespace {

constexpr double kRadialEps = 1e-6;

/// tanh(r) / r, so that the mean is v_max tanh(|z|) z / |z|.
double radial_gain(double r) { return r > kRadialEps ? std::tanh(r) / r : 1.0 - r * r / 3.0; }

double radial_gain_slope(double r) {
  const double t = std::tanh(r);
  return ((1.0 - t * t) * r - t) / (r * r);
}

}  // namespace

PolicyOutput forward(const NetworkParams& params, const FeatureEncoding& features, ForwardCache* cache,
                     const GateReplay& replay) {
  const NetworkShape& s = params.shape;
  if (features.humans.rows() > 0 && features.humans.cols() != s.human_dim) {
    throw std::invalid_argument("forward: human feature width does not match the network");
  }
  if (features.ego.size() != s.ego_dim) throw std::invalid_argument("forward: ego feature width does not match");

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  bool finite = encoder_forward(params.shared.data(), s, features, c.actor, replay.actor);
  finite &= encoder_forward(params.cost.data(), s, features, c.cost, replay.cost);

  const HeadOffsets sh = shared_heads(s);
  const HeadOffsets ch = cost_heads(s);
  const double* ps = params.shared.data();
  const double* pc = params.cost.data();

  c.head_pre = mat(ps, sh.actor_w, 2, s.trunk) * c.actor.h2 + vec(ps, sh.actor_b, 2);
  c.v_max = features.v_max;

  PolicyOutput out;
  const Eigen::Vector2d squashed = features.v_max * radial_gain(c.head_pre.norm()) * c.head_pre;
  out.mean = {squashed(0), squashed(1)};
  out.value_r = mat(ps, sh.value_w, 1, s.trunk).row(0).dot(c.actor.h2) + ps[sh.value_b];
  out.value_c = mat(pc, ch.value_w, 1, s.trunk).row(0).dot(c.cost.h2) + pc[ch.value_b];
  if (!finite || !out.mean.finite() || !std::isfinite(out.value_r) || !std::isfinite(out.value_c)) {
    throw NumericalError("forward: non-finite activation (max |param| = " +
                         std::to_string(max_abs_param(params)) + ")");
  }
  return out;
}

void backward(const NetworkParams& params, const ForwardCache& cache, const OutputAdjoint& adjoint, Gradients& grads) {
  const NetworkShape& s = params.shape;
  const HeadOffsets sh = shared_heads(s);
  const HeadOffsets ch = cost_heads(s);
  const double* ps = params.shared.data();
  const double* pc = params.cost.data();
  double* gs = grads.shared.data();
  double* gc = grads.cost.data();

  // Shared block: actor head and reward value head meet at the trunk.
  const Eigen::Vector2d& d_mean = adjoint.d_mean;
  const Eigen::Vector2d& z = cache.head_pre;
  const double r = z.norm();
  Eigen::Vector2d d_pre = cache.v_max * radial_gain(r) * d_mean;
  if (r > kRadialEps) d_pre += cache.v_max * (radial_gain_slope(r) / r) * z.dot(d_mean) * z;
  GradMat(gs + sh.actor_w, 2, s.trunk).noalias() += d_pre * cache.actor.h2.transpose();
  GradVec(gs + sh.actor_b, 2) += d_pre;
  GradVec(gs + sh.value_w, s.trunk) += adjoint.d_value_r * cache.actor.h2;
  gs[sh.value_b] += adjoint.d_value_r;
  Eigen::VectorXd d_h2 = mat(ps, sh.actor_w, 2, s.trunk).transpose() * d_pre;
  d_h2 += adjoint.d_value_r * vec(ps, sh.value_w, s.trunk);
  if (adjoint.d_mean.squaredNorm() > 0.0 || adjoint.d_value_r != 0.0) {
    encoder_backward(ps, gs, s, cache.actor, d_h2);
  }

  if (adjoint.d_value_c != 0.0) {
    GradVec(gc + ch.value_w, s.trunk) += adjoint.d_value_c * cache.cost.h2;
    gc[ch.value_b] += adjoint.d_value_c;
    const Eigen::VectorXd d_h2c = adjoint.d_value_c * vec(pc, ch.value_w, s.trunk);
    encoder_backward(pc, gc, s, cache.cost, d_h2c);
  }
}

double gaussian_log_prob(const Vec2& action, const Vec2& mean, double std) {
  const double var = std * std;
  return -(action - mean).squared_norm() / (2.0 * var) - std::log(2.0 * std::numbers::pi * var);
}

double gaussian_entropy(double std) { return std::log(2.0 * std::numbers::pi * std::numbers::e * std * std); }

ActionSample sample_action(const Vec2& mean, double std, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double ex = normal(rng);
  const double ey = normal(rng);
  ActionSample out;
  out.action = mean + Vec2{ex, ey} * std;
  out.log_prob = gaussian_log_prob(out.action, mean, std);
  return out;
}

ActionSample sample_action(const Vec2& mean, double std, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_action(mean, std, rng);
}

double max_abs_param(const NetworkParams& params) {
  double m = 0.0;
  for (double v : params.shared) m = std::max(m, std::fabs(v));
  for (double v : params.cost) m = std::max(m, std::fabs(v));
  return m;
}

}  // namespace crowdnav
