#include "crowdnav/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "crowdnav/buffer_cost.hpp"
#include "crowdnav/ped_policies.hpp"

namespace crowdnav {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json vec_json(const Vec2& v) { return json::array({v.x, v.y}); }
Vec2 vec_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

json agent_json(const AgentState& a) {
  return {{"position", vec_json(a.position)},
          {"velocity", vec_json(a.velocity)},
          {"radius", a.radius},
          {"goal", vec_json(a.goal)},
          {"v_max", a.v_max}};
}

AgentState agent_from(const json& j) {
  AgentState a;
  a.position = vec_from(j.at("position"));
  a.velocity = vec_from(j.at("velocity"));
  a.radius = j.at("radius").get<double>();
  a.goal = vec_from(j.at("goal"));
  a.v_max = j.at("v_max").get<double>();
  return a;
}

json predictions_json(const std::vector<PredictionSet>& preds) {
  json out = json::array();
  for (const PredictionSet& p : preds) {
    json points = json::array();
    for (const Vec2& v : p.points) points.push_back(vec_json(v));
    out.push_back({{"points", points}, {"radii", p.radii}});
  }
  return out;
}

std::vector<PredictionSet> predictions_from(const json& j) {
  std::vector<PredictionSet> out;
  for (const json& p : j) {
    PredictionSet s;
    for (const json& v : p.at("points")) s.points.push_back(vec_from(v));
    s.radii = p.at("radii").get<std::vector<double>>();
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<AgentState> humans_from(const json& j) {
  std::vector<AgentState> out;
  for (const json& h : j) out.push_back(agent_from(h));
  return out;
}

const char* source_name(IntrusionSource s) {
  switch (s) {
    case IntrusionSource::None: return "none";
    case IntrusionSource::CurrentPosition: return "current";
    case IntrusionSource::Prediction: return "prediction";
  }
  return "none";
}

json observation_json(const Observation& obs) {
  json humans = json::array();
  for (const AgentState& h : obs.humans) humans.push_back(agent_json(h));
  return {{"robot", agent_json(obs.robot)}, {"humans", humans}, {"predictions", predictions_json(obs.predictions)}};
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

Vec2 NetworkPolicy::act(const Observation& obs) {
  const FeatureEncoding f = encode(obs);
  return f.frame.rotate_to_world(forward(params_, f).mean);
}

Vec2 OrcaRobotPolicy::act(const Observation& obs) { return orca_velocity(obs.robot, obs.humans, params_, dt_); }

Vec2 SfRobotPolicy::act(const Observation& obs) { return sf_velocity(obs.robot, obs.humans, params_, dt_); }

std::unique_ptr<RobotPolicy> make_baseline_policy(const std::string& name, const ExperimentConfig& config) {
  if (name == "orca") return std::make_unique<OrcaRobotPolicy>(config.world.orca, config.world.dt);
  if (name == "sf") return std::make_unique<SfRobotPolicy>(config.world.sf, config.world.dt);
  if (name == "goal") return std::make_unique<GoalSeekingPolicy>(config.world.dt);
  throw std::invalid_argument("unknown baseline policy " + name + " (expected orca, sf or goal)");
}

double surface_separation(const AgentState& robot, std::span<const AgentState> humans) {
  double best = std::numeric_limits<double>::infinity();
  for (const AgentState& h : humans) {
    best = std::min(best, distance(robot.position, h.position) - robot.radius - h.radius);
  }
  return best;
}

BatchReport aggregate(std::vector<EpisodeMetrics> episodes, std::vector<std::uint64_t> base_seeds) {
  std::stable_sort(episodes.begin(), episodes.end(),
                   [](const EpisodeMetrics& a, const EpisodeMetrics& b) { return a.seed < b.seed; });
  BatchReport r;
  r.n_episodes = static_cast<int>(episodes.size());
  r.seeds = std::move(base_seeds);
  if (episodes.empty()) {
    r.nt = r.pl = r.itr = r.sd = kNaN;
    return r;
  }

  int success = 0, collision = 0, timeout = 0;
  std::vector<double> nav_times, path_lengths, ratios, distances;
  for (const EpisodeMetrics& e : episodes) {
    switch (e.outcome) {
      case Outcome::Success:
        ++success;
        nav_times.push_back(e.nav_time);
        path_lengths.push_back(e.path_length);
        break;
      case Outcome::Collision: ++collision; break;
      case Outcome::Timeout: ++timeout; break;
      case Outcome::Running: throw std::logic_error("aggregate: episode did not terminate");
    }
    ratios.push_back(e.total_steps > 0 ? static_cast<double>(e.intrusion_steps) / e.total_steps : 0.0);
    distances.insert(distances.end(), e.intrusion_distances.begin(), e.intrusion_distances.end());
  }
  const double n = static_cast<double>(episodes.size());
  r.sr = success / n;
  r.cr = collision / n;
  r.tr = timeout / n;
  r.nt = mean_of(nav_times);
  r.pl = mean_of(path_lengths);
  r.itr = mean_of(ratios);
  r.sd = mean_of(distances);
  return r;
}

json report_json(const BatchReport& r) {
  return {{"SR", r.sr},
          {"CR", r.cr},
          {"TR", r.tr},
          {"NT", number_or_null(r.nt)},
          {"PL", number_or_null(r.pl)},
          {"ITR", number_or_null(r.itr)},
          {"SD", number_or_null(r.sd)},
          {"n_episodes", r.n_episodes},
          {"seeds", r.seeds}};
}

TrajectoryWriter::TrajectoryWriter(const std::filesystem::path& path) : out_(path, std::ios::trunc) {
  if (!out_) throw std::runtime_error("cannot write trajectory dump " + path.string());
}

void TrajectoryWriter::header(const json& header) { out_ << header.dump() << '\n'; }

void TrajectoryWriter::step(int t, const Vec2& action, const StepResult& r) {
  json rec = observation_json(r.observation);
  rec["type"] = "step";
  rec["t"] = t;
  rec["action"] = vec_json(action);
  rec["reward"] = r.reward;
  rec["cost"] = r.cost;
  rec["outcome"] = to_string(r.outcome);
  rec["intrusion"] = {{"depth", r.intrusion.depth},
                      {"source", source_name(r.intrusion.source)},
                      {"human", r.intrusion.human},
                      {"step", r.intrusion.step}};
  out_ << rec.dump() << '\n';
  if (!out_) throw std::runtime_error("failed writing trajectory dump");
}

EpisodeMetrics run_episode(const ExperimentConfig& config, RobotPolicy& policy, std::uint64_t seed,
                           TrajectoryWriter* writer) {
  CrowdEnv env(config);
  Observation obs = env.reset(seed);
  if (writer) {
    writer->header({{"type", "header"},
                    {"seed", seed},
                    {"policy", policy.name()},
                    {"config_hash", hex64(config_hash(config))},
                    {"config", config},
                    {"initial", observation_json(obs)}});
  }

  EpisodeMetrics m;
  m.seed = seed;
  Vec2 previous = obs.robot.position;
  while (!env.done()) {
    const Vec2 action = policy.act(obs);
    StepResult r = env.step(action);
    const AgentState& robot = r.observation.robot;
    m.path_length += distance(previous, robot.position);
    previous = robot.position;
    ++m.total_steps;
    if (r.intrusion.depth > 0.0) {
      ++m.intrusion_steps;
      m.intrusion_distances.push_back(surface_separation(robot, r.observation.humans));
    }
    if (writer) writer->step(env.t(), action, r);
    obs = std::move(r.observation);
  }
  m.outcome = env.outcome();
  m.nav_time = m.total_steps * config.world.dt;
  return m;
}

std::vector<std::uint64_t> episode_seeds(std::span<const std::uint64_t> base_seeds, int n_episodes) {
  if (base_seeds.empty()) throw std::invalid_argument("episode_seeds: at least one base seed is required");
  if (n_episodes < 0) throw std::invalid_argument("episode_seeds: n_episodes must be nonnegative");
  const auto k = static_cast<int>(base_seeds.size());
  std::vector<std::uint64_t> out;
  out.reserve(static_cast<std::size_t>(n_episodes));
  for (int i = 0; i < k; ++i) {
    const int count = n_episodes / k + (i < n_episodes % k ? 1 : 0);
    for (int j = 0; j < count; ++j) out.push_back(mix_seed(base_seeds[i], static_cast<std::uint64_t>(j)));
  }
  return out;
}

BatchReport run_eval(const ExperimentConfig& config, RobotPolicy& policy, int n_episodes,
                     std::span<const std::uint64_t> base_seeds, std::vector<EpisodeMetrics>* episodes) {
  std::vector<EpisodeMetrics> all;
  for (std::uint64_t seed : episode_seeds(base_seeds, n_episodes)) all.push_back(run_episode(config, policy, seed));
  if (episodes) *episodes = all;
  return aggregate(std::move(all), std::vector<std::uint64_t>(base_seeds.begin(), base_seeds.end()));
}

void write_episode_csv(const std::filesystem::path& path, const std::vector<EpisodeMetrics>& episodes) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17);
  out << "seed,outcome,nav_time,path_length,intrusion_steps,total_steps,itr,sd_mean\n";
  for (const EpisodeMetrics& e : episodes) {
    const double itr = e.total_steps > 0 ? static_cast<double>(e.intrusion_steps) / e.total_steps : 0.0;
    out << e.seed << ',' << to_string(e.outcome) << ',' << e.nav_time << ',' << e.path_length << ','
        << e.intrusion_steps << ',' << e.total_steps << ',' << itr << ',';
    if (!e.intrusion_distances.empty()) out << mean_of(e.intrusion_distances);
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

EpisodeMetrics dump_trajectory(const ExperimentConfig& config, RobotPolicy& policy, std::uint64_t seed,
                               const std::filesystem::path& out_path) {
  TrajectoryWriter writer(out_path);
  return run_episode(config, policy, seed, &writer);
}

std::vector<json> read_dump(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dump " + path.string());
  std::vector<json> records;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) records.push_back(json::parse(line));
  }
  if (records.empty() || records.front().value("type", "") != "header") {
    throw std::runtime_error("dump has no header record: " + path.string());
  }
  return records;
}

ReplayResult replay_dump(const std::filesystem::path& path) {
  const std::vector<json> records = read_dump(path);
  const json& header = records.front();
  const auto config = header.at("config").get<ExperimentConfig>();
  CrowdEnv env(config);
  env.reset(header.at("seed").get<std::uint64_t>());

  ReplayResult result;
  auto fail = [&](const std::string& what) {
    result.identical = false;
    result.mismatch = "step " + std::to_string(result.steps) + ": " + what;
    return result;
  };
  for (std::size_t i = 1; i < records.size(); ++i) {
    const json& rec = records[i];
    if (env.done()) return fail("dump continues after the episode ended");
    const StepResult r = env.step(vec_from(rec.at("action")));
    ++result.steps;
    if (rec.at("t").get<int>() != env.t()) return fail("time index differs");
    if (!(agent_from(rec.at("robot")) == r.observation.robot)) return fail("robot state differs");
    if (humans_from(rec.at("humans")) != r.observation.humans) return fail("human states differ");
    if (predictions_from(rec.at("predictions")) != r.observation.predictions) return fail("predictions differ");
    if (rec.at("reward").get<double>() != r.reward || rec.at("cost").get<double>() != r.cost) {
      return fail("reward or cost differs");
    }
    if (outcome_from_string(rec.at("outcome").get<std::string>()) != r.outcome) return fail("outcome differs");
  }
  if (!env.done()) return fail("dump ends before the episode terminated");
  result.identical = true;
  return result;
}

EpisodeMetrics metrics_from_dump(const std::filesystem::path& path) {
  const std::vector<json> records = read_dump(path);
  const json& header = records.front();
  const auto config = header.at("config").get<ExperimentConfig>();

  EpisodeMetrics m;
  m.seed = header.at("seed").get<std::uint64_t>();
  Vec2 previous = agent_from(header.at("initial").at("robot")).position;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const json& rec = records[i];
    const AgentState robot = agent_from(rec.at("robot"));
    const std::vector<AgentState> humans = humans_from(rec.at("humans"));
    const std::vector<PredictionSet> preds = predictions_from(rec.at("predictions"));
    m.path_length += distance(previous, robot.position);
    previous = robot.position;
    ++m.total_steps;
    if (max_intrusion(robot.position, robot.radius, humans, preds, config.buffer).depth > 0.0) {
      ++m.intrusion_steps;
      m.intrusion_distances.push_back(surface_separation(robot, humans));
    }
    m.outcome = outcome_from_string(rec.at("outcome").get<std::string>());
  }
  m.nav_time = m.total_steps * config.world.dt;
  return m;
}

CoverageReport run_coverage_report(const ExperimentConfig& config, RobotPolicy& policy, int n_episodes,
                                   std::span<const std::uint64_t> base_seeds) {
  CoverageReport report;
  const auto humans = static_cast<std::size_t>(config.world.n_humans);
  const auto horizon = static_cast<std::size_t>(config.horizon);
  std::vector<std::vector<long>> covered(humans, std::vector<long>(horizon, 0));
  std::vector<std::vector<long>> total(humans, std::vector<long>(horizon, 0));

  int episode = 0;
  for (std::uint64_t seed : episode_seeds(base_seeds, n_episodes)) {
    CrowdEnv env(config);
    Observation obs = env.reset(seed);
    while (!env.done()) {
      StepResult r = env.step(policy.act(obs));
      for (const CoverageEvent& e : env.coverage_events()) {
        report.rows.push_back({episode, env.t(), e});
        ++total[e.human][e.step];
        if (e.covered) ++covered[e.human][e.step];
        if (episode == 0 && e.human == 0) report.trace.emplace_back(env.t(), e.step + 1, e.radius - e.actual);
      }
      obs = std::move(r.observation);
    }
    ++episode;
  }

  long all_covered = 0, all_total = 0;
  report.per_cell.assign(humans, std::vector<double>(horizon, kNaN));
  for (std::size_t h = 0; h < humans; ++h) {
    for (std::size_t k = 0; k < horizon; ++k) {
      if (total[h][k] > 0) report.per_cell[h][k] = static_cast<double>(covered[h][k]) / total[h][k];
      all_covered += covered[h][k];
      all_total += total[h][k];
    }
  }
  report.aggregate = all_total > 0 ? static_cast<double>(all_covered) / all_total : kNaN;
  return report;
}

void write_coverage_csv(const std::filesystem::path& path, const CoverageReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17);
  out << "step,h,k,actual,sampled_radius,covered_flag\n";
  for (const CoverageRow& row : report.rows) {
    out << row.step << ',' << row.event.human << ',' << row.event.step + 1 << ',' << row.event.actual << ','
        << row.event.radius << ',' << (row.event.covered ? 1 : 0) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

json coverage_summary(const CoverageReport& report) {
  json cells = json::array();
  for (const auto& row : report.per_cell) {
    json r = json::array();
    for (double v : row) r.push_back(number_or_null(v));
    cells.push_back(r);
  }
  json trace = json::array();
  for (const auto& [step, k, err] : report.trace) trace.push_back({{"step", step}, {"k", k}, {"aci_error", err}});
  return {{"aggregate_coverage", number_or_null(report.aggregate)},
          {"per_cell_coverage", cells},
          {"rows", report.rows.size()},
          {"trace_human0_episode0", trace}};
}

}  // namespace crowdnav
