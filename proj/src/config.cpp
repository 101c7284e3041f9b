#include "crowdnav/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace crowdnav {

using nlohmann::json;

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("invalid config: " + what);
}

bool in_unit(double p) { return p >= 0.0 && p <= 1.0; }

/// Reads fields from a JSON object and rejects keys nobody asked for.
class Reader {
 public:
  explicit Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw std::invalid_argument("invalid config: " + where_ + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (auto it = j_.find(key); it != j_.end()) {
      try {
        out = it->template get<T>();
      } catch (const json::exception& e) {
        throw std::invalid_argument("invalid config: " + where_ + "." + key + ": " + e.what());
      }
    }
  }

  const json* sub(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw std::invalid_argument("invalid config: unknown key " + where_ + "." + key);
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

std::string model_name(PedestrianModel m) { return m == PedestrianModel::Orca ? "ORCA" : "SF"; }

PedestrianModel model_from(const std::string& s) {
  if (s == "ORCA" || s == "orca") return PedestrianModel::Orca;
  if (s == "SF" || s == "sf") return PedestrianModel::SocialForce;
  throw std::invalid_argument("invalid config: pedestrian_model must be ORCA or SF, got " + s);
}

std::string norm_name(AdvantageNormalization n) {
  switch (n) {
    case AdvantageNormalization::None: return "none";
    case AdvantageNormalization::Minibatch: return "minibatch";
    case AdvantageNormalization::Batch: return "batch";
    case AdvantageNormalization::MinibatchCenter: return "minibatch_center";
  }
  return "none";
}

AdvantageNormalization norm_from(const std::string& s) {
  if (s == "none") return AdvantageNormalization::None;
  if (s == "minibatch") return AdvantageNormalization::Minibatch;
  if (s == "batch") return AdvantageNormalization::Batch;
  if (s == "minibatch_center") return AdvantageNormalization::MinibatchCenter;
  throw std::invalid_argument("invalid config: normalization must be none, minibatch, batch or minibatch_center, got " +
                              s);
}

json range_json(const Range& r) { return json::array({r.lo, r.hi}); }

Range range_from(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("invalid config: " + where + " must be [lo, hi]");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

void WorldConfig::validate() const {
  require(arena_half_extent > 0.0, "arena_half_extent > 0");
  require(n_humans >= 0, "n_humans >= 0");
  require(robot_radius > 0.0, "robot_radius > 0");
  require(human_radius_range.lo > 0.0 && human_radius_range.lo <= human_radius_range.hi, "human_radius_range ordered and positive");
  require(human_vmax_range.lo > 0.0 && human_vmax_range.lo <= human_vmax_range.hi, "human_vmax_range ordered and positive");
  require(robot_vmax > 0.0, "robot_vmax > 0");
  require(dt > 0.0, "dt > 0");
  require(max_steps > 0, "max_steps > 0");
  require(goal_min_distance >= 0.0, "goal_min_distance >= 0");
  require(in_unit(goal_resample_prob), "goal_resample_prob in [0,1]");
  require(goal_resample_period > 0, "goal_resample_period > 0");
  require(in_unit(rushing_fraction), "rushing_fraction in [0,1]");
  require(rushing_vmax > 0.0, "rushing_vmax > 0");
  require(spawn_margin >= 0.0, "spawn_margin >= 0");
  require(orca.time_horizon > 0.0, "orca.time_horizon > 0");
  require(orca.neighbor_dist > 0.0, "orca.neighbor_dist > 0");
  require(orca.responsibility > 0.0 && orca.responsibility <= 1.0, "orca.responsibility in (0,1]");
  require(sf.relaxation_time > 0.0 && sf.repulsion_strength > 0.0 && sf.repulsion_range > 0.0, "sf parameters positive");
  require(reward.goal_tolerance >= 0.0, "reward.goal_tolerance >= 0");
}

void DtaciConfig::validate() const {
  require(alpha > 0.0 && alpha < 1.0, "dtaci.alpha in (0,1)");
  require(!learning_rates.empty(), "dtaci.learning_rates nonempty");
  for (double g : learning_rates) require(g > 0.0, "dtaci.learning_rates positive");
  require(in_unit(sigma), "dtaci.sigma in [0,1]");
  require(eta > 0.0, "dtaci.eta > 0");
  for (double e : initial_errors) require(e >= 0.0, "dtaci.initial_errors nonnegative");
}

void BufferSpec::validate(int horizon) const {
  require(r_disc >= 0.0, "buffer.r_disc >= 0");
  require(k_prime >= 1 && k_prime <= horizon, "buffer.k_prime in [1, horizon]");
  require(mu > 0.0, "buffer.mu > 0");
}

void NetworkConfig::validate() const {
  require(embed_dim > 0 && attention_dim > 0 && trunk_dim > 0, "network dimensions positive");
  require(fixed_action_std > 0.0, "network.fixed_action_std > 0");
}

void TrainConfig::validate() const {
  require(discount > 0.0 && discount <= 1.0, "train.discount in (0,1]");
  require(gae_lambda > 0.0 && gae_lambda <= 1.0, "train.gae_lambda in (0,1]");
  require(clip > 0.0, "train.clip > 0");
  require(epochs > 0 && minibatch_size > 0, "train.epochs and minibatch_size positive");
  require(c1 >= 0.0 && c2 >= 0.0, "train.c1, c2 nonnegative");
  require(learning_rate > 0.0 && lr_lambda >= 0.0, "train learning rates");
  require(lambda_init >= 0.0, "train.lambda_init >= 0");
  require(cost_window > 0 && log_window > 0, "train windows positive");
  require(total_steps > 0 && rollout_steps > 0 && n_parallel_envs > 0, "train step counts positive");
  require(rollout_steps % n_parallel_envs == 0, "train.rollout_steps divisible by n_parallel_envs");
}

void ExperimentConfig::validate() const {
  world.validate();
  dtaci.validate();
  require(horizon >= 1, "horizon >= 1");
  require(static_cast<int>(dtaci.initial_errors.size()) == horizon, "dtaci.initial_errors has one entry per horizon step");
  buffer.validate(horizon);
  network.validate();
  train.validate();
}

void to_json(json& j, const ExperimentConfig& c) {
  const auto& w = c.world;
  j = json{
      {"world",
       {{"arena_half_extent", w.arena_half_extent},
        {"n_humans", w.n_humans},
        {"robot_radius", w.robot_radius},
        {"human_radius_range", range_json(w.human_radius_range)},
        {"human_vmax_range", range_json(w.human_vmax_range)},
        {"robot_vmax", w.robot_vmax},
        {"dt", w.dt},
        {"max_steps", w.max_steps},
        {"goal_min_distance", w.goal_min_distance},
        {"goal_resample_prob", w.goal_resample_prob},
        {"goal_resample_period", w.goal_resample_period},
        {"rushing_fraction", w.rushing_fraction},
        {"rushing_vmax", w.rushing_vmax},
        {"pedestrian_model", model_name(w.pedestrian_model)},
        {"spawn_margin", w.spawn_margin},
        {"orca",
         {{"time_horizon", w.orca.time_horizon},
          {"neighbor_dist", w.orca.neighbor_dist},
          {"responsibility", w.orca.responsibility}}},
        {"sf",
         {{"relaxation_time", w.sf.relaxation_time},
          {"repulsion_strength", w.sf.repulsion_strength},
          {"repulsion_range", w.sf.repulsion_range}}},
        {"reward",
         {{"success", w.reward.success},
          {"collision", w.reward.collision},
          {"potential_weight", w.reward.potential_weight},
          {"goal_tolerance", w.reward.goal_tolerance}}}}},
      {"dtaci",
       {{"alpha", c.dtaci.alpha},
        {"learning_rates", c.dtaci.learning_rates},
        {"sigma", c.dtaci.sigma},
        {"eta", c.dtaci.eta},
        {"initial_errors", c.dtaci.initial_errors}}},
      {"buffer", {{"r_disc", c.buffer.r_disc}, {"k_prime", c.buffer.k_prime}, {"mu", c.buffer.mu}}},
      {"horizon", c.horizon},
      {"network",
       {{"embed_dim", c.network.embed_dim},
        {"attention_dim", c.network.attention_dim},
        {"trunk_dim", c.network.trunk_dim},
        {"fixed_action_std", c.network.fixed_action_std}}},
      {"train",
       {{"discount", c.train.discount},
        {"gae_lambda", c.train.gae_lambda},
        {"clip", c.train.clip},
        {"epochs", c.train.epochs},
        {"minibatch_size", c.train.minibatch_size},
        {"c1", c.train.c1},
        {"c2", c.train.c2},
        {"learning_rate", c.train.learning_rate},
        {"max_grad_norm", c.train.max_grad_norm},
        {"lr_lambda", c.train.lr_lambda},
        {"lambda_init", c.train.lambda_init},
        {"freeze_lambda", c.train.freeze_lambda},
        {"cost_limit", c.train.cost_limit},
        {"cost_window", c.train.cost_window},
        {"total_steps", c.train.total_steps},
        {"rollout_steps", c.train.rollout_steps},
        {"n_parallel_envs", c.train.n_parallel_envs},
        {"reward_normalization", norm_name(c.train.reward_normalization)},
        {"cost_normalization", norm_name(c.train.cost_normalization)},
        {"log_window", c.train.log_window}}},
  };
}

void from_json(const json& j, ExperimentConfig& c) {
  Reader top(j, "config");
  if (const json* wj = top.sub("world")) {
    auto& w = c.world;
    Reader r(*wj, "world");
    r.get("arena_half_extent", w.arena_half_extent);
    r.get("n_humans", w.n_humans);
    r.get("robot_radius", w.robot_radius);
    if (const json* x = r.sub("human_radius_range")) w.human_radius_range = range_from(*x, "world.human_radius_range");
    if (const json* x = r.sub("human_vmax_range")) w.human_vmax_range = range_from(*x, "world.human_vmax_range");
    r.get("robot_vmax", w.robot_vmax);
    r.get("dt", w.dt);
    r.get("max_steps", w.max_steps);
    r.get("goal_min_distance", w.goal_min_distance);
    r.get("goal_resample_prob", w.goal_resample_prob);
    r.get("goal_resample_period", w.goal_resample_period);
    r.get("rushing_fraction", w.rushing_fraction);
    r.get("rushing_vmax", w.rushing_vmax);
    std::string model = model_name(w.pedestrian_model);
    r.get("pedestrian_model", model);
    w.pedestrian_model = model_from(model);
    r.get("spawn_margin", w.spawn_margin);
    if (const json* x = r.sub("orca")) {
      Reader o(*x, "world.orca");
      o.get("time_horizon", w.orca.time_horizon);
      o.get("neighbor_dist", w.orca.neighbor_dist);
      o.get("responsibility", w.orca.responsibility);
    }
    if (const json* x = r.sub("sf")) {
      Reader s(*x, "world.sf");
      s.get("relaxation_time", w.sf.relaxation_time);
      s.get("repulsion_strength", w.sf.repulsion_strength);
      s.get("repulsion_range", w.sf.repulsion_range);
    }
    if (const json* x = r.sub("reward")) {
      Reader s(*x, "world.reward");
      s.get("success", w.reward.success);
      s.get("collision", w.reward.collision);
      s.get("potential_weight", w.reward.potential_weight);
      s.get("goal_tolerance", w.reward.goal_tolerance);
    }
  }
  if (const json* dj = top.sub("dtaci")) {
    Reader r(*dj, "dtaci");
    r.get("alpha", c.dtaci.alpha);
    r.get("learning_rates", c.dtaci.learning_rates);
    r.get("sigma", c.dtaci.sigma);
    r.get("eta", c.dtaci.eta);
    r.get("initial_errors", c.dtaci.initial_errors);
  }
  if (const json* bj = top.sub("buffer")) {
    Reader r(*bj, "buffer");
    r.get("r_disc", c.buffer.r_disc);
    r.get("k_prime", c.buffer.k_prime);
    r.get("mu", c.buffer.mu);
  }
  top.get("horizon", c.horizon);
  if (const json* nj = top.sub("network")) {
    Reader r(*nj, "network");
    r.get("embed_dim", c.network.embed_dim);
    r.get("attention_dim", c.network.attention_dim);
    r.get("trunk_dim", c.network.trunk_dim);
    r.get("fixed_action_std", c.network.fixed_action_std);
  }
  if (const json* tj = top.sub("train")) {
    auto& t = c.train;
    Reader r(*tj, "train");
    r.get("discount", t.discount);
    r.get("gae_lambda", t.gae_lambda);
    r.get("clip", t.clip);
    r.get("epochs", t.epochs);
    r.get("minibatch_size", t.minibatch_size);
    r.get("c1", t.c1);
    r.get("c2", t.c2);
    r.get("learning_rate", t.learning_rate);
    r.get("max_grad_norm", t.max_grad_norm);
    r.get("lr_lambda", t.lr_lambda);
    r.get("lambda_init", t.lambda_init);
    r.get("freeze_lambda", t.freeze_lambda);
    r.get("cost_limit", t.cost_limit);
    r.get("cost_window", t.cost_window);
    r.get("total_steps", t.total_steps);
    r.get("rollout_steps", t.rollout_steps);
    r.get("n_parallel_envs", t.n_parallel_envs);
    std::string rn = norm_name(t.reward_normalization);
    std::string cn = norm_name(t.cost_normalization);
    r.get("reward_normalization", rn);
    r.get("cost_normalization", cn);
    t.reward_normalization = norm_from(rn);
    t.cost_normalization = norm_from(cn);
    r.get("log_window", t.log_window);
  }
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("invalid config: ") + e.what());
  }
  ExperimentConfig c = j.get<ExperimentConfig>();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::uint64_t config_hash(const ExperimentConfig& c) {
  const std::string text = json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void apply_preset(ExperimentConfig& c, const std::string& name) {
  if (name == "rushing") {
    c.world.rushing_fraction = 0.2;
    c.world.rushing_vmax = 2.0;
  } else if (name == "sf") {
    c.world.pedestrian_model = PedestrianModel::SocialForce;
  } else if (name == "desk") {
    c.world.n_humans = 5;
    c.world.arena_half_extent = 4.0;
    c.world.goal_min_distance = 6.0;
  } else {
    throw std::invalid_argument("unknown preset " + name);
  }
  c.validate();
}

}  // namespace crowdnav
