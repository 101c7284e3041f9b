#include "crowdnav/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace crowdnav {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kActionStream = 2;
constexpr std::uint64_t kShuffleStream = 3;
constexpr std::uint64_t kWorkerStreamBase = 1000;

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double mean_or_nan(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

GaeResult compute_gae(std::span<const double> signal, std::span<const double> values, std::span<const bool> dones,
                      double last_value, double discount, double gae_lambda) {
  const std::size_t n = signal.size();
  if (values.size() != n || dones.size() != n) throw std::invalid_argument("compute_gae: sequences must align");
  GaeResult out;
  out.advantages.resize(n);
  out.targets.resize(n);
  double running = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double next_value = i + 1 == n ? last_value : values[i + 1];
    const double live = dones[i] ? 0.0 : 1.0;
    const double delta = signal[i] + discount * next_value * live - values[i];
    running = delta + discount * gae_lambda * live * running;
    out.advantages[i] = running;
    out.targets[i] = running + values[i];
  }
  return out;
}

double policy_loss(double ratio, double advantage, double clip) {
  const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
  return std::min(ratio * advantage, clipped * advantage);
}

CriticLosses critic_losses(std::span<const double> value_r, std::span<const double> value_c,
                           std::span<const double> target_r, std::span<const double> target_c, double c1, double c2) {
  const std::size_t n = value_r.size();
  if (value_c.size() != n || target_r.size() != n || target_c.size() != n) {
    throw std::invalid_argument("critic_losses: batches must align");
  }
  CriticLosses out;
  if (n == 0) return out;
  for (std::size_t i = 0; i < n; ++i) {
    out.reward += c1 * (value_r[i] - target_r[i]) * (value_r[i] - target_r[i]);
    out.cost += c2 * (value_c[i] - target_c[i]) * (value_c[i] - target_c[i]);
  }
  out.reward /= static_cast<double>(n);
  out.cost /= static_cast<double>(n);
  return out;
}

void LagrangeState::record_episode(double cost_sum) {
  episode_costs.push_back(cost_sum);
  while (episode_costs.size() > window) episode_costs.pop_front();
}

double LagrangeState::mean_cost() const {
  if (episode_costs.empty()) throw std::logic_error("lagrange: no episode costs recorded");
  return std::accumulate(episode_costs.begin(), episode_costs.end(), 0.0) / static_cast<double>(episode_costs.size());
}

double lambda_update(LagrangeState& state) {
  state.lambda = std::max(0.0, state.lambda + state.lr_lambda * (state.mean_cost() - state.cost_limit));
  return state.lambda;
}

void standardize(std::span<double> values) {
  if (values.empty()) return;
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  for (double& v : values) v -= mean;
  if (values.size() < 2) return;
  double var = 0.0;
  for (double v : values) var += v * v;
  const double std = std::sqrt(var / n);
  for (double& v : values) v /= (std + 1e-8);
}

LossStats composite_loss(const NetworkParams& params, std::span<const LossSample> batch, const LossWeights& weights,
                         Gradients* grads, LossBranches* record, const LossBranches* replay) {
  LossStats stats;
  if (batch.empty()) return stats;
  if (replay && replay->clipped.size() != batch.size()) throw std::invalid_argument("composite_loss: replay size");

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  const double var = params.fixed_action_std * params.fixed_action_std;
  ForwardCache cache;
  if (record) {
    record->actor.clear();
    record->cost.clear();
    record->clipped.clear();
    record->clipped_factor.clear();
  }

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const LossSample& s = batch[i];
    GateReplay gates;
    if (replay) gates = {&replay->actor[i], &replay->cost[i]};
    const PolicyOutput out = forward(params, *s.features, &cache, gates);

    const double log_prob = gaussian_log_prob(s.action, out.mean, params.fixed_action_std);
    const double ratio = std::exp(log_prob - s.old_log_prob);
    const double unclipped = ratio * s.advantage;
    bool clipped;
    double factor;
    if (replay) {
      clipped = replay->clipped[i];
      factor = replay->clipped_factor[i];
    } else {
      factor = std::clamp(ratio, 1.0 - weights.clip, 1.0 + weights.clip);
      clipped = factor * s.advantage < unclipped;
    }
    const double surrogate = clipped ? factor * s.advantage : unclipped;
    if (record) {
      record->actor.push_back(cache.actor.gates);
      record->cost.push_back(cache.cost.gates);
      record->clipped.push_back(clipped);
      record->clipped_factor.push_back(factor);
    }

    const double dr = out.value_r - s.target_r;
    const double dc = out.value_c - s.target_c;
    stats.surrogate += inv_n * surrogate;
    stats.value_r_loss += inv_n * weights.value_r * dr * dr;
    stats.value_c_loss += inv_n * weights.value_c * dc * dc;
    stats.clip_fraction += clipped ? inv_n : 0.0;

    if (grads) {
      OutputAdjoint adj;
      if (!clipped && weights.policy != 0.0) {
        const double coef = -weights.policy * inv_n * unclipped / var;
        adj.d_mean = Eigen::Vector2d(coef * (s.action.x - out.mean.x), coef * (s.action.y - out.mean.y));
      }
      adj.d_value_r = 2.0 * weights.value_r * dr * inv_n;
      adj.d_value_c = 2.0 * weights.value_c * dc * inv_n;
      backward(params, cache, adj, *grads);
    }
  }
  stats.loss = -weights.policy * stats.surrogate + stats.value_r_loss + stats.value_c_loss;
  return stats;
}

Adam::Adam(std::size_t n, double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::vector<double>& params, const std::vector<double>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) throw std::invalid_argument("adam: size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i] * grads[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

double clip_grad_norm(std::vector<double>& grads, double max_norm) {
  double sq = 0.0;
  for (double g : grads) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (double& g : grads) g *= scale;
  }
  return norm;
}

PpoLagrangianTrainer::PpoLagrangianTrainer(ExperimentConfig config, EnvFactory factory, std::uint64_t seed)
    : PpoLagrangianTrainer(config, std::move(factory), seed,
                           init_params(NetworkShape::from(config), config.network.fixed_action_std,
                                       mix_seed(seed, kInitStream))) {}

PpoLagrangianTrainer::PpoLagrangianTrainer(ExperimentConfig config, EnvFactory factory, std::uint64_t seed,
                                           NetworkParams initial)
    : config_(std::move(config)),
      seed_(seed),
      params_(std::move(initial)),
      adam_shared_(params_.shared.size(), config_.train.learning_rate),
      adam_cost_(params_.cost.size(), config_.train.learning_rate),
      action_rng_(mix_seed(seed, kActionStream)),
      shuffle_rng_(mix_seed(seed, kShuffleStream)) {
  config_.validate();
  const TrainConfig& t = config_.train;
  lagrange_.lambda = t.lambda_init;
  lagrange_.lr_lambda = t.lr_lambda;
  lagrange_.cost_limit = t.cost_limit;
  lagrange_.window = static_cast<std::size_t>(t.cost_window);

  workers_.resize(static_cast<std::size_t>(t.n_parallel_envs));
  for (std::size_t i = 0; i < workers_.size(); ++i) {
    Worker& w = workers_[i];
    w.env = factory();
    w.stream = kWorkerStreamBase + i;
    w.obs = w.env->reset(next_episode_seed(w));
  }
}

std::uint64_t PpoLagrangianTrainer::next_episode_seed(Worker& w) {
  return mix_seed(mix_seed(seed_, w.stream), w.episodes++);
}

void PpoLagrangianTrainer::collect(std::vector<Transition>& batch, IterationLog& entry) {
  const TrainConfig& t = config_.train;
  const int per_env = t.rollout_steps / t.n_parallel_envs;
  std::vector<double> returns;
  std::vector<double> costs;

  for (Worker& w : workers_) {
    const std::size_t begin = batch.size();
    for (int step = 0; step < per_env; ++step) {
      Transition tr;
      tr.features = encode(w.obs);
      const PolicyOutput out = forward(params_, tr.features);
      const ActionSample sample = sample_action(out.mean, params_.fixed_action_std, action_rng_);
      const StepResult r = w.env->step(tr.features.frame.rotate_to_world(sample.action));
      tr.action = sample.action;
      tr.log_prob = sample.log_prob;
      tr.reward = r.reward;
      tr.cost = r.cost;
      tr.value_r = out.value_r;
      tr.value_c = out.value_c;
      tr.done = r.done;
      batch.push_back(std::move(tr));

      w.episode_reward += r.reward;
      w.episode_cost += r.cost;
      if (r.done) {
        returns.push_back(w.episode_reward);
        costs.push_back(w.episode_cost);
        lagrange_.record_episode(w.episode_cost);
        recent_success_.push_back(r.outcome == Outcome::Success);
        while (recent_success_.size() > static_cast<std::size_t>(t.log_window)) recent_success_.pop_front();
        w.episode_reward = 0.0;
        w.episode_cost = 0.0;
        w.obs = w.env->reset(next_episode_seed(w));
      } else {
        w.obs = r.observation;
      }
    }

    double last_r = 0.0;
    double last_c = 0.0;
    if (!batch.back().done) {
      const PolicyOutput tail = forward(params_, encode(w.obs));
      last_r = tail.value_r;
      last_c = tail.value_c;
    }
    const std::size_t n = batch.size() - begin;
    std::vector<double> rewards(n), costs_seg(n), vr(n), vc(n);
    const auto dones = std::make_unique<bool[]>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Transition& tr = batch[begin + i];
      rewards[i] = tr.reward;
      costs_seg[i] = tr.cost;
      vr[i] = tr.value_r;
      vc[i] = tr.value_c;
      dones[i] = tr.done;
    }
    const std::span<const bool> done_span(dones.get(), n);
    const GaeResult gr = compute_gae(rewards, vr, done_span, last_r, t.discount, t.gae_lambda);
    const GaeResult gc = compute_gae(costs_seg, vc, done_span, last_c, t.discount, t.gae_lambda);
    for (std::size_t i = 0; i < n; ++i) {
      Transition& tr = batch[begin + i];
      tr.adv_r = gr.advantages[i];
      tr.target_r = gr.targets[i];
      tr.adv_c = gc.advantages[i];
      tr.target_c = gc.targets[i];
    }
  }

  entry.episodes = static_cast<int>(returns.size());
  entry.mean_reward = mean_or_nan(returns);
  entry.mean_cost = mean_or_nan(costs);
  const auto successes = std::count(recent_success_.begin(), recent_success_.end(), true);
  entry.sr_recent =
      recent_success_.empty() ? 0.0 : static_cast<double>(successes) / static_cast<double>(recent_success_.size());
}

namespace {

void normalize_minibatch(std::span<double> values, AdvantageNormalization mode) {
  if (mode == AdvantageNormalization::Minibatch) {
    standardize(values);
  } else if (mode == AdvantageNormalization::MinibatchCenter && !values.empty()) {
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    for (double& v : values) v -= mean;
  }
}

}  // namespace

void PpoLagrangianTrainer::update(std::vector<Transition>& batch, IterationLog& entry) {
  const TrainConfig& t = config_.train;
  if (!t.freeze_lambda && !lagrange_.episode_costs.empty()) lambda_update(lagrange_);
  const double lambda = lagrange_.lambda;

  if (t.reward_normalization == AdvantageNormalization::Batch || t.cost_normalization == AdvantageNormalization::Batch) {
    std::vector<double> ar(batch.size()), ac(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      ar[i] = batch[i].adv_r;
      ac[i] = batch[i].adv_c;
    }
    if (t.reward_normalization == AdvantageNormalization::Batch) standardize(ar);
    if (t.cost_normalization == AdvantageNormalization::Batch) standardize(ac);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      batch[i].adv_r = ar[i];
      batch[i].adv_c = ac[i];
    }
  }

  const LossWeights weights{1.0, t.c1, t.c2, t.clip};
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Gradients grads = Gradients::zeros_like(params_);
  std::vector<LossSample> samples;
  std::vector<double> ar, ac;
  LossStats totals;
  int updates = 0;

  for (int epoch = 0; epoch < t.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng_);
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(t.minibatch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(t.minibatch_size));
      const std::size_t n = end - begin;
      ar.resize(n);
      ac.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        ar[i] = batch[order[begin + i]].adv_r;
        ac[i] = batch[order[begin + i]].adv_c;
      }
      normalize_minibatch(ar, t.reward_normalization);
      normalize_minibatch(ac, t.cost_normalization);

      samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const Transition& tr = batch[order[begin + i]];
        samples[i] = {&tr.features, tr.action, tr.log_prob, combined_advantage(ar[i], ac[i], lambda), tr.target_r,
                      tr.target_c};
      }

      std::fill(grads.shared.begin(), grads.shared.end(), 0.0);
      std::fill(grads.cost.begin(), grads.cost.end(), 0.0);
      const LossStats stats = composite_loss(params_, samples, weights, &grads);
      if (!std::isfinite(stats.loss)) throw NumericalError("training diverged: non-finite loss");
      clip_grad_norm(grads.shared, t.max_grad_norm);
      clip_grad_norm(grads.cost, t.max_grad_norm);
      adam_shared_.step(params_.shared, grads.shared);
      adam_cost_.step(params_.cost, grads.cost);

      totals.surrogate += stats.surrogate;
      totals.value_r_loss += stats.value_r_loss;
      totals.value_c_loss += stats.value_c_loss;
      totals.clip_fraction += stats.clip_fraction;
      ++updates;
    }
  }
  if (!all_finite(params_.shared) || !all_finite(params_.cost)) {
    throw NumericalError("training diverged: non-finite parameters");
  }

  const double inv = updates > 0 ? 1.0 / updates : 0.0;
  entry.surrogate = totals.surrogate * inv;
  entry.value_r_loss = totals.value_r_loss * inv;
  entry.value_c_loss = totals.value_c_loss * inv;
  entry.clip_fraction = totals.clip_fraction * inv;
  entry.lambda = lambda;
}

IterationLog PpoLagrangianTrainer::iterate() {
  IterationLog entry;
  entry.iteration = iteration_++;
  std::vector<Transition> batch;
  batch.reserve(static_cast<std::size_t>(config_.train.rollout_steps));
  collect(batch, entry);
  env_steps_ += static_cast<std::int64_t>(batch.size());
  entry.env_steps = env_steps_;
  update(batch, entry);
  log_.push_back(entry);
  return entry;
}

std::vector<IterationLog> PpoLagrangianTrainer::train(const std::function<void(const IterationLog&)>& on_iteration) {
  while (env_steps_ < config_.train.total_steps) {
    const IterationLog entry = iterate();
    if (on_iteration) on_iteration(entry);
  }
  return log_;
}

}  // namespace crowdnav
