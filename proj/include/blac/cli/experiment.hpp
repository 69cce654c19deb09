#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "blac/cli/config.hpp"
#include "blac/trainer/trainer.hpp"

namespace blac::cli {

/// Header of the per-seed and evaluation CSV files.
inline constexpr const char* kEpisodeHeader =
    "episode,reward,violations,cost,backup_steps,final_distance";
inline constexpr const char* kAggregateHeader =
    "episode,reward_mean,reward_std,violations_mean,violations_std,backup_steps_mean";

struct AggregateRow {
  int episode = 0;
  double reward_mean = 0.0;
  double reward_std = 0.0;
  double violations_mean = 0.0;
  double violations_std = 0.0;
  double backup_steps_mean = 0.0;
};

struct RunSummary {
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<trainer::EpisodeMetrics>> per_seed;
  std::vector<AggregateRow> aggregate;
};

void write_episode_row(std::ostream& out, const trainer::EpisodeMetrics& m);
/// Parses a file written with `kEpisodeHeader`; throws std::runtime_error on
/// a malformed row.
std::vector<trainer::EpisodeMetrics> read_episode_csv(std::istream& in);

/// Cross-seed mean and population standard deviation per episode. All
/// series must have the same length.
std::vector<AggregateRow> aggregate(
    const std::vector<std::vector<trainer::EpisodeMetrics>>& per_seed);
void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows);

/// Writes networks, multipliers, temperature, the GP dataset, a manifest
/// and the resolved config into `dir`.
void save_checkpoint(const std::string& dir, const trainer::Trainer& trainer,
                     const ExperimentConfig& config, std::uint64_t seed);

/// Rebuilds a trainer from a checkpoint. `seed` overrides the stored seed.
/// Throws std::runtime_error when files are missing or do not match the
/// environment.
std::unique_ptr<trainer::Trainer> load_checkpoint(const std::string& dir,
                                                  std::optional<std::uint64_t> seed = {},
                                                  ExperimentConfig* config_out = nullptr);

/// Trains every seed and writes config.yaml, seed_<s>/episodes.csv,
/// seed_<s>/checkpoint/ and aggregate.csv under config.output_dir.
RunSummary run_experiment(const ExperimentConfig& config);

/// Rolls out the checkpointed policy without learning and writes the
/// episodes to `csv_path`.
std::vector<trainer::EpisodeMetrics> eval_policy(const std::string& checkpoint, int episodes,
                                                 bool deterministic,
                                                 std::optional<std::uint64_t> seed,
                                                 const std::string& csv_path);

/// Runs one experiment per value of `param` (a `section.key` name), each in
/// output_dir/<param>=<value>.
std::vector<RunSummary> sweep(const ExperimentConfig& base, const std::string& param,
                              const std::vector<std::string>& values);

}  // namespace blac::cli
