#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "blac/trainer/trainer.hpp"

namespace blac::cli {

/// Invalid configuration; the message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string label = "run";
  std::string output_dir = "runs/default";
  std::vector<std::uint64_t> seeds{1};
  /// Save a checkpoint every this many episodes; 0 saves only the final one.
  int checkpoint_every = 0;
  trainer::TrainConfig train;
};

/// One addressable config entry, `section.key`.
struct Field {
  std::string section;
  std::string key;
  std::function<YAML::Node()> get;
  std::function<void(const YAML::Node&)> set;

  std::string name() const { return section + "." + key; }
  /// BLAC_<SECTION>_<KEY>, upper case.
  std::string env_var() const;
};

/// Every config entry, bound to `config`.
std::vector<Field> fields(ExperimentConfig& config);

/// Overlays `doc` onto `config`. Unknown sections or keys and type errors
/// raise ConfigError.
void merge(ExperimentConfig& config, const YAML::Node& doc);

/// Applies BLAC_<SECTION>_<KEY> overrides found through `lookup`; values are
/// parsed as YAML scalars or flow sequences.
void apply_env_overrides(ExperimentConfig& config,
                         const std::function<const char*(const char*)>& lookup);

/// Sets one `section.key` from a YAML-formatted string.
void set_field(ExperimentConfig& config, const std::string& name, const std::string& value);

/// Range and consistency checks; raises ConfigError.
void validate(const ExperimentConfig& config);

/// Defaults, then the file at `path` (if nonempty), then process
/// environment overrides, then validation.
ExperimentConfig load_config(const std::string& path);

/// Complete snapshot: every field, so that a run can be reproduced from it.
YAML::Node to_yaml(const ExperimentConfig& config);
std::string dump(const ExperimentConfig& config);

}  // namespace blac::cli
