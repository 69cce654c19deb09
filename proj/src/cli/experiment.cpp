#include "blac/cli/experiment.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "blac/diffcore/serialization.hpp"

namespace blac::cli {

namespace fs = std::filesystem;
using trainer::EpisodeMetrics;

void write_episode_row(std::ostream& out, const EpisodeMetrics& m) {
  out << fmt::format("{},{},{},{},{},{}\n", m.episode, m.reward, m.violations, m.cost,
                     m.backup_steps, m.final_distance);
}

std::vector<EpisodeMetrics> read_episode_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kEpisodeHeader) {
    throw std::runtime_error("episode CSV: unexpected header '" + line + "'");
  }
  std::vector<EpisodeMetrics> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw std::runtime_error("episode CSV: malformed row '" + line + "'");
    try {
      EpisodeMetrics m;
      m.episode = std::stoi(cells[0]);
      m.reward = std::strtod(cells[1].c_str(), nullptr);
      m.violations = std::stoi(cells[2]);
      m.cost = std::strtod(cells[3].c_str(), nullptr);
      m.backup_steps = std::stoi(cells[4]);
      m.final_distance = std::strtod(cells[5].c_str(), nullptr);
      out.push_back(m);
    } catch (const std::exception&) {
      throw std::runtime_error("episode CSV: malformed row '" + line + "'");
    }
  }
  return out;
}

std::vector<AggregateRow> aggregate(const std::vector<std::vector<EpisodeMetrics>>& per_seed) {
  std::vector<AggregateRow> rows;
  if (per_seed.empty()) return rows;
  const std::size_t len = per_seed.front().size();
  for (const auto& s : per_seed) {
    if (s.size() != len) throw std::invalid_argument("aggregate: series lengths differ");
  }
  const double n = static_cast<double>(per_seed.size());
  for (std::size_t e = 0; e < len; ++e) {
    AggregateRow r;
    r.episode = per_seed.front()[e].episode;
    for (const auto& s : per_seed) {
      r.reward_mean += s[e].reward;
      r.violations_mean += s[e].violations;
      r.backup_steps_mean += s[e].backup_steps;
    }
    r.reward_mean /= n;
    r.violations_mean /= n;
    r.backup_steps_mean /= n;
    for (const auto& s : per_seed) {
      r.reward_std += (s[e].reward - r.reward_mean) * (s[e].reward - r.reward_mean);
      r.violations_std +=
          (s[e].violations - r.violations_mean) * (s[e].violations - r.violations_mean);
    }
    r.reward_std = std::sqrt(r.reward_std / n);
    r.violations_std = std::sqrt(r.violations_std / n);
    rows.push_back(r);
  }
  return rows;
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << kAggregateHeader << "\n";
  for (const AggregateRow& r : rows) {
    out << fmt::format("{},{},{},{},{},{}\n", r.episode, r.reward_mean, r.reward_std,
                       r.violations_mean, r.violations_std, r.backup_steps_mean);
  }
}

namespace {

constexpr const char* kNetworkFiles[] = {"policy.mlp",    "q1.mlp",        "q2.mlp",
                                         "q1_target.mlp", "q2_target.mlp", "lyapunov.mlp",
                                         "lyapunov_target.mlp"};

std::vector<diff::Mlp*> networks(agent::Learner& l) {
  return {&l.policy().net(),      &l.critics().online(0), &l.critics().online(1),
          &l.critics().target(0), &l.critics().target(1), &l.lyapunov().online(),
          &l.lyapunov().target()};
}

std::vector<const diff::Mlp*> networks(const agent::Learner& l) {
  return {&l.policy().net(),      &l.critics().online(0), &l.critics().online(1),
          &l.critics().target(0), &l.critics().target(1), &l.lyapunov().online(),
          &l.lyapunov().target()};
}

YAML::Node real_list(const std::vector<double>& xs) {
  YAML::Node n(YAML::NodeType::Sequence);
  for (double x : xs) n.push_back(fmt::format("{}", x));
  n.SetStyle(YAML::EmitterStyle::Flow);
  return n;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_gp(const fs::path& path, const gp::GpResidualModel& gp) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << fmt::format("gp {} {} {} {}\n", gp.size(), gp.input_dim(), gp.output_dim(),
                     gp.frozen() ? 1 : 0);
  for (std::size_t i = 0; i < gp.size(); ++i) {
    const Vector& x = gp.inputs()[i];
    const Vector& y = gp.targets()[i];
    for (Eigen::Index k = 0; k < x.size(); ++k) out << fmt::format("{} ", x[k]);
    for (Eigen::Index k = 0; k < y.size(); ++k) {
      out << fmt::format("{}", y[k]) << (k + 1 == y.size() ? "\n" : " ");
    }
  }
}

void read_gp(const fs::path& path, gp::GpResidualModel& gp) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  std::string tag;
  std::size_t n = 0;
  int in_dim = 0, out_dim = 0, frozen = 0;
  in >> tag >> n >> in_dim >> out_dim >> frozen;
  if (!in || tag != "gp" || in_dim != gp.input_dim() || out_dim != gp.output_dim()) {
    throw std::runtime_error("checkpoint: GP dataset does not match the environment");
  }
  std::vector<Vector> xs, ys;
  for (std::size_t i = 0; i < n; ++i) {
    Vector x(in_dim), y(out_dim);
    std::string tok;
    for (int k = 0; k < in_dim; ++k) {
      in >> tok;
      x[k] = std::strtod(tok.c_str(), nullptr);
    }
    for (int k = 0; k < out_dim; ++k) {
      in >> tok;
      y[k] = std::strtod(tok.c_str(), nullptr);
    }
    if (!in) throw std::runtime_error("checkpoint: truncated GP dataset");
    xs.push_back(std::move(x));
    ys.push_back(std::move(y));
  }
  if (!xs.empty()) gp.fit(xs, ys);
  if (frozen != 0) gp.freeze();
}

}  // namespace

void save_checkpoint(const std::string& dir, const trainer::Trainer& trainer,
                     const ExperimentConfig& config, std::uint64_t seed) {
  fs::create_directories(dir);
  const agent::Learner& learner = trainer.learner();
  const auto nets = networks(learner);
  for (std::size_t i = 0; i < nets.size(); ++i) {
    diff::save_mlp((fs::path(dir) / kNetworkFiles[i]).string(), *nets[i]);
  }
  write_gp(fs::path(dir) / "gp.txt", trainer.gp());
  write_text(fs::path(dir) / "config.yaml", dump(config));

  const agent::LagrangianState& lag = learner.lagrangian();
  YAML::Node m;
  m["env"] = trainer.env().id();
  m["variant"] = agent::to_string(learner.config().variant);
  m["seed"] = static_cast<unsigned long long>(seed);
  m["episode"] = trainer.episodes_done();
  m["updates"] = learner.updates();
  m["log_alpha"] = fmt::format("{}", learner.temperature().log_alpha.value(0, 0));
  m["lambda"] = real_list(lag.lambda);
  m["rho_lambda"] = real_list(lag.rho_lambda);
  m["zeta"] = fmt::format("{}", lag.zeta);
  m["rho_zeta"] = fmt::format("{}", lag.rho_zeta);
  YAML::Node files(YAML::NodeType::Sequence);
  for (const char* f : kNetworkFiles) files.push_back(f);
  m["networks"] = files;
  YAML::Emitter out;
  out << m;
  write_text(fs::path(dir) / "manifest.yaml", std::string(out.c_str()) + "\n");
}

std::unique_ptr<trainer::Trainer> load_checkpoint(const std::string& dir,
                                                  std::optional<std::uint64_t> seed,
                                                  ExperimentConfig* config_out) {
  const fs::path root(dir);
  if (!fs::exists(root / "manifest.yaml") || !fs::exists(root / "config.yaml")) {
    throw std::runtime_error("checkpoint: " + dir + " has no manifest.yaml/config.yaml");
  }
  ExperimentConfig config;
  merge(config, YAML::LoadFile((root / "config.yaml").string()));
  validate(config);
  const YAML::Node m = YAML::LoadFile((root / "manifest.yaml").string());
  if (m["env"].as<std::string>() != config.train.env_id) {
    throw std::runtime_error("checkpoint: manifest env '" + m["env"].as<std::string>() +
                             "' does not match config env '" + config.train.env_id + "'");
  }
  const std::uint64_t s = seed.value_or(m["seed"].as<unsigned long long>());
  auto trainer = std::make_unique<trainer::Trainer>(config.train, s);
  agent::Learner& learner = trainer->learner();
  const auto nets = networks(learner);
  for (std::size_t i = 0; i < nets.size(); ++i) {
    diff::Mlp loaded = diff::load_mlp((root / kNetworkFiles[i]).string());
    if (loaded.widths() != nets[i]->widths()) {
      throw std::runtime_error(std::string("checkpoint: ") + kNetworkFiles[i] +
                               " does not match the environment/network shape");
    }
    *nets[i] = std::move(loaded);
  }
  learner.temperature().log_alpha.value(0, 0) =
      std::strtod(m["log_alpha"].as<std::string>().c_str(), nullptr);
  agent::LagrangianState& lag = learner.lagrangian();
  const auto lambda = m["lambda"].as<std::vector<double>>();
  const auto rho = m["rho_lambda"].as<std::vector<double>>();
  if (lambda.size() != lag.lambda.size() || rho.size() != lag.rho_lambda.size()) {
    throw std::runtime_error("checkpoint: multiplier count does not match the environment");
  }
  lag.lambda = lambda;
  lag.rho_lambda = rho;
  lag.zeta = m["zeta"].as<double>();
  lag.rho_zeta = m["rho_zeta"].as<double>();
  read_gp(root / "gp.txt", trainer->gp());
  if (config_out != nullptr) *config_out = config;
  return trainer;
}

RunSummary run_experiment(const ExperimentConfig& config) {
  validate(config);
  const fs::path out_dir(config.output_dir);
  fs::create_directories(out_dir);
  write_text(out_dir / "config.yaml", dump(config));

  RunSummary summary;
  summary.seeds = config.seeds;
  for (std::uint64_t seed : config.seeds) {
    const fs::path seed_dir = out_dir / fmt::format("seed_{}", seed);
    fs::create_directories(seed_dir);
    std::ofstream csv(seed_dir / "episodes.csv");
    if (!csv) throw std::runtime_error("cannot write " + (seed_dir / "episodes.csv").string());
    csv << kEpisodeHeader << "\n" << std::flush;

    trainer::Trainer trainer(config.train, seed);
    std::vector<EpisodeMetrics> series;
    for (int k = 0; k < config.train.episodes; ++k) {
      series.push_back(trainer.episode_rollout());
      const EpisodeMetrics& m = series.back();
      write_episode_row(csv, m);
      csv.flush();
      spdlog::info("[{} seed {}] episode {}: reward {:.2f}, violations {}, backup steps {}",
                   config.label, seed, m.episode, m.reward, m.violations, m.backup_steps);
      if (config.checkpoint_every > 0 && m.episode % config.checkpoint_every == 0 &&
          k + 1 < config.train.episodes) {
        save_checkpoint((seed_dir / fmt::format("checkpoint_ep{}", m.episode)).string(),
                        trainer, config, seed);
      }
    }
    save_checkpoint((seed_dir / "checkpoint").string(), trainer, config, seed);
    summary.per_seed.push_back(std::move(series));
  }
  summary.aggregate = aggregate(summary.per_seed);
  std::ofstream agg(out_dir / "aggregate.csv");
  write_aggregate_csv(agg, summary.aggregate);
  return summary;
}

std::vector<EpisodeMetrics> eval_policy(const std::string& checkpoint, int episodes,
                                        bool deterministic, std::optional<std::uint64_t> seed,
                                        const std::string& csv_path) {
  if (episodes < 0) throw std::invalid_argument("eval: episodes must be >= 0");
  auto trainer = load_checkpoint(checkpoint, seed);
  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot write " + csv_path);
  csv << kEpisodeHeader << "\n";
  std::vector<EpisodeMetrics> out;
  for (int k = 0; k < episodes; ++k) {
    EpisodeMetrics m = trainer->evaluate_episode(deterministic);
    m.episode = k + 1;
    write_episode_row(csv, m);
    out.push_back(m);
  }
  return out;
}

std::vector<RunSummary> sweep(const ExperimentConfig& base, const std::string& param,
                              const std::vector<std::string>& values) {
  if (values.empty()) throw ConfigError("sweep: no values given");
  std::vector<ExperimentConfig> configs;
  for (const std::string& v : values) {
    ExperimentConfig c = base;
    set_field(c, param, v);
    c.output_dir = (fs::path(base.output_dir) / fmt::format("{}={}", param, v)).string();
    c.label = fmt::format("{} {}={}", base.label, param, v);
    validate(c);
    configs.push_back(std::move(c));
  }
  std::vector<RunSummary> out;
  for (const ExperimentConfig& c : configs) out.push_back(run_experiment(c));
  return out;
}

}  // namespace blac::cli
