#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "blac/cli/config.hpp"
#include "blac/cli/experiment.hpp"

namespace {

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const std::string& s : split(text)) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size()) throw blac::cli::ConfigError("--seeds: '" + s + "' is not a seed");
    seeds.push_back(v);
  }
  if (seeds.empty()) throw blac::cli::ConfigError("--seeds: no seeds given");
  return seeds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Barrier-Lyapunov actor-critic experiments"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

  auto* train = app.add_subcommand("train", "Train every seed of an experiment config");
  std::string train_config, train_seeds, train_out;
  train->add_option("--config", train_config, "YAML experiment config")->required();
  train->add_option("--seeds", train_seeds, "Comma-separated seeds overriding run.seeds");
  train->add_option("--out", train_out, "Output directory overriding run.output_dir");

  auto* eval = app.add_subcommand("eval", "Roll out a saved policy without learning");
  std::string checkpoint, eval_out;
  int episodes = 1;
  bool deterministic = false;
  std::uint64_t eval_seed = 0;
  auto* seed_opt = eval->add_option("--seed", eval_seed, "Seed (default: the checkpoint's)");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  eval->add_option("--episodes", episodes, "Number of episodes")->required();
  eval->add_flag("--deterministic", deterministic, "Use the tanh of the policy mean");
  eval->add_option("--out", eval_out, "CSV path (default: <checkpoint>/eval.csv)");

  auto* sweep = app.add_subcommand("sweep", "Train once per value of one config key");
  std::string sweep_config, param, values;
  sweep->add_option("--config", sweep_config, "YAML experiment config")->required();
  sweep->add_option("--param", param, "Key as section.key, e.g. agent.clf_beta")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*train) {
      blac::cli::ExperimentConfig config = blac::cli::load_config(train_config);
      if (!train_seeds.empty()) config.seeds = parse_seeds(train_seeds);
      if (!train_out.empty()) config.output_dir = train_out;
      blac::cli::validate(config);
      blac::cli::run_experiment(config);
      spdlog::info("results written to {}", config.output_dir);
    } else if (*eval) {
      std::optional<std::uint64_t> seed;
      if (seed_opt->count() > 0) seed = eval_seed;
      const std::string out =
          eval_out.empty() ? (std::filesystem::path(checkpoint) / "eval.csv").string() : eval_out;
      const auto metrics = blac::cli::eval_policy(checkpoint, episodes, deterministic, seed, out);
      for (const auto& m : metrics) {
        spdlog::info("episode {}: reward {:.2f}, violations {}, backup steps {}", m.episode,
                     m.reward, m.violations, m.backup_steps);
      }
      spdlog::info("evaluation written to {}", out);
    } else if (*sweep) {
      const blac::cli::ExperimentConfig config = blac::cli::load_config(sweep_config);
      blac::cli::sweep(config, param, split(values));
    }
  } catch (const blac::cli::ConfigError& e) {
    spdlog::error("invalid configuration: {}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
