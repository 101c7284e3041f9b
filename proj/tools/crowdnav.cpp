#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "crowdnav/checkpoint.hpp"
#include "crowdnav/config.hpp"
#include "crowdnav/eval.hpp"
#include "crowdnav/ppo.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace crowdnav;

namespace {

struct CliError : std::runtime_error {
  CliError(std::string kind_, const std::string& msg) : std::runtime_error(msg), kind(std::move(kind_)) {}
  std::string kind;
};

int fail(const std::string& kind, const std::string& message, int code) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
  return code;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw CliError("usage", "bad seed '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw CliError("usage", "no seeds given");
  return out;
}

ExperimentConfig config_from(const std::string& path, const std::string& ood) {
  ExperimentConfig c = load_config(path);
  if (!ood.empty()) apply_preset(c, ood);
  c.validate();
  return c;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_train_log(const fs::path& path, const std::vector<IterationLog>& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17) << "iteration,mean_reward,mean_cost,lambda,sr_recent\n";
  for (const auto& e : log) {
    out << e.iteration << ',' << e.mean_reward << ',' << e.mean_cost << ',' << e.lambda << ',' << e.sr_recent << '\n';
  }
}

NetworkParams load_network(const std::string& ckpt, const ExperimentConfig& config) {
  Checkpoint ck = load_checkpoint(ckpt);
  check_compatible(ck.params, config);
  return std::move(ck.params);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crowd navigation with adaptive uncertainty buffers and constrained RL"};
  app.require_subcommand(1);

  std::string config_path, ckpt_path, out_path, seeds_text = "0", ood, policy_name;
  std::uint64_t seed = 0;
  int episodes = 100;
  std::int64_t total_steps = -1;
  bool freeze_lambda = false;

  auto* train = app.add_subcommand("train", "train a policy with PPO-Lagrangian");
  train->add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("--seed", seed, "training seed")->required();
  train->add_option("--out", out_path, "output directory")->required();
  train->add_option("--total-steps", total_steps, "override train.total_steps");
  train->add_flag("--freeze-lambda", freeze_lambda, "keep lambda at its initial value");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--ckpt", ckpt_path)->required()->check(CLI::ExistingFile);
  eval->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
  eval->add_option("--episodes", episodes)->check(CLI::PositiveNumber);
  eval->add_option("--seeds", seeds_text, "comma separated base seeds");
  eval->add_option("--out", out_path, "per-episode CSV")->required();
  eval->add_option("--ood", ood, "environment preset")->check(CLI::IsMember({"rushing", "sf"}));

  auto* baseline = app.add_subcommand("baseline", "evaluate a rule-based robot policy");
  baseline->add_option("--policy", policy_name)->required()->check(CLI::IsMember({"orca", "sf", "goal"}));
  baseline->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
  baseline->add_option("--episodes", episodes)->check(CLI::PositiveNumber);
  baseline->add_option("--seeds", seeds_text);
  baseline->add_option("--out", out_path)->required();
  baseline->add_option("--ood", ood)->check(CLI::IsMember({"rushing", "sf"}));

  auto* coverage = app.add_subcommand("coverage", "prediction-radius coverage report");
  coverage->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
  coverage->add_option("--out", out_path)->required();
  coverage->add_option("--episodes", episodes)->check(CLI::PositiveNumber);
  coverage->add_option("--seeds", seeds_text);
  coverage->add_option("--policy", policy_name, "scripted robot")->check(CLI::IsMember({"orca", "sf", "goal"}));

  auto* dump = app.add_subcommand("dump", "write one episode as JSON Lines");
  dump->add_option("--ckpt", ckpt_path)->required()->check(CLI::ExistingFile);
  dump->add_option("--seed", seed)->required();
  dump->add_option("--out", out_path)->required();
  dump->add_option("--config", config_path, "defaults to the config stored in the checkpoint")
      ->check(CLI::ExistingFile);
  dump->add_option("--ood", ood)->check(CLI::IsMember({"rushing", "sf"}));

  std::string dump_path;
  auto* replay = app.add_subcommand("replay", "re-simulate a dump and compare every state");
  replay->add_option("--dump", dump_path)->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail("usage", e.what(), 2);
  }

  try {
    if (*train) {
      ExperimentConfig config = config_from(config_path, "");
      if (total_steps > 0) config.train.total_steps = total_steps;
      if (freeze_lambda) config.train.freeze_lambda = true;
      config.validate();
      fs::create_directories(out_path);
      PpoLagrangianTrainer trainer(config, [config] { return std::make_unique<CrowdEnvironment>(config); }, seed);
      const auto log = trainer.train([](const IterationLog& e) {
        std::cerr << "iter " << e.iteration << " steps " << e.env_steps << " reward " << e.mean_reward << " cost "
                  << e.mean_cost << " lambda " << e.lambda << " sr " << e.sr_recent << '\n';
      });
      save_checkpoint(fs::path(out_path) / "checkpoint.bin", trainer.params(), config, json{{"train", seed}});
      write_train_log(fs::path(out_path) / "train_log.csv", log);
      std::cout << json{{"checkpoint", (fs::path(out_path) / "checkpoint.bin").string()},
                        {"iterations", log.size()},
                        {"env_steps", trainer.env_steps()},
                        {"lambda", trainer.lagrange().lambda}}
                       .dump()
                << '\n';
    } else if (*eval || *baseline) {
      const ExperimentConfig config = config_from(config_path, ood);
      std::unique_ptr<RobotPolicy> policy;
      if (*eval) {
        policy = std::make_unique<NetworkPolicy>(load_network(ckpt_path, config));
      } else {
        policy = make_baseline_policy(policy_name, config);
      }
      const auto seeds = parse_seeds(seeds_text);
      std::vector<EpisodeMetrics> metrics;
      const BatchReport report = run_eval(config, *policy, episodes, seeds, &metrics);
      ensure_parent(out_path);
      write_episode_csv(out_path, metrics);
      json j = report_json(report);
      j["policy"] = policy->name();
      if (!ood.empty()) j["ood"] = ood;
      std::cout << j.dump() << '\n';
    } else if (*coverage) {
      const ExperimentConfig config = config_from(config_path, "");
      auto policy = make_baseline_policy(policy_name.empty() ? "goal" : policy_name, config);
      const CoverageReport report = run_coverage_report(config, *policy, episodes, parse_seeds(seeds_text));
      ensure_parent(out_path);
      write_coverage_csv(out_path, report);
      std::cout << coverage_summary(report).dump() << '\n';
    } else if (*dump) {
      Checkpoint ck = load_checkpoint(ckpt_path);
      ExperimentConfig config;
      if (!config_path.empty()) {
        config = load_config(config_path);
      } else if (ck.config) {
        config = *ck.config;
      } else {
        throw CliError("usage", "checkpoint carries no config; pass --config");
      }
      if (!ood.empty()) apply_preset(config, ood);
      config.validate();
      check_compatible(ck.params, config);
      NetworkPolicy policy(std::move(ck.params));
      ensure_parent(out_path);
      const EpisodeMetrics m = dump_trajectory(config, policy, seed, out_path);
      std::cout << json{{"out", out_path}, {"steps", m.total_steps}, {"outcome", to_string(m.outcome)}}.dump() << '\n';
    } else if (*replay) {
      const ReplayResult r = replay_dump(dump_path);
      std::cout << json{{"identical", r.identical}, {"steps", r.steps}, {"mismatch", r.mismatch}}.dump() << '\n';
      if (!r.identical) return 5;
    }
  } catch (const CliError& e) {
    return fail(e.kind, e.what(), 2);
  } catch (const LoadError& e) {
    return fail("load", e.what(), 3);
  } catch (const ScenarioError& e) {
    return fail("scenario", e.what(), 4);
  } catch (const NumericalError& e) {
    return fail("numerical", e.what(), 4);
  } catch (const std::invalid_argument& e) {
    return fail("config", e.what(), 2);
  } catch (const std::exception& e) {
    return fail("runtime", e.what(), 1);
  }
  return 0;
}
