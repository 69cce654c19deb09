#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "blac/agent/learner.hpp"
#include "blac/buffer/replay_buffer.hpp"
#include "blac/envs/car_following.hpp"
#include "blac/envs/unicycle.hpp"
#include "blac/gp/gp_residual.hpp"
#include "blac/safety/backup_qp.hpp"

namespace blac::trainer {

/// When to hand control to the backup controller and when to give it back.
struct TriggerConfig {
  int window = 20;                  // W, steps
  double trap_displacement = 0.05;  // m, lookahead-point motion over W steps
  double trap_margin = 0.1;         // trigger only if min_i h_i(x) is below this
  double resume_distance = 0.5;     // m from the trap point
  int max_backup_steps = 50;
  double proximity_offset = 1.0;    // car: trigger below delta + offset
  double hysteresis = 0.5;          // car: release at delta + offset + hysteresis
};

struct GpSettings {
  bool enabled = true;
  gp::GpConfig model;
  /// Keep every `stride`-th observed residual.
  int stride = 5;
  /// No dataset change after this many episodes.
  int freeze_after_episodes = 20;
};

struct TrainConfig {
  std::string env_id = "unicycle";  // unicycle | car_following
  int episodes = 100;
  /// 0 keeps the environment's episode length.
  int steps_per_episode = 0;
  std::size_t batch_size = 64;
  std::size_t buffer_capacity = 100000;
  agent::AgentConfig agent;
  bool backup_enabled = true;
  safety::BackupParams backup;
  TriggerConfig trigger;
  GpSettings gp;
  envs::UnicycleParams unicycle;
  envs::CarFollowingParams car_following;
};

/// Throws std::invalid_argument naming the offending field.
void validate(const TrainConfig& config);

std::unique_ptr<envs::Environment> make_environment(const TrainConfig& config);

struct EpisodeMetrics {
  int episode = 0;
  int steps = 0;
  double reward = 0.0;
  int violations = 0;
  double cost = 0.0;
  int backup_steps = 0;
  double final_distance = 0.0;
};

struct TriggerDecision {
  bool use_backup = false;
  Vector u_nominal;
};

/// `window` holds the states preceding x, oldest first. Never triggers with
/// fewer than W states in the window.
TriggerDecision backup_trigger(const envs::Environment& env, const TriggerConfig& config,
                               const std::deque<Vector>& window, const Vector& x);

/// `trap_state` is the state at which backup control started.
bool backup_release(const envs::Environment& env, const TriggerConfig& config,
                    const Vector& x, const Vector& trap_state, int steps_in_backup);

/// Distance to the desired state: unicycle position to destination, car
/// following |gap - desired gap|.
double distance_to_goal(const envs::Environment& env, const Vector& x);

struct StepRecord {
  Vector state;
  Vector control;
  envs::StepFeedback feedback;
  bool backup = false;
  bool updated = false;
};

/// The training loop for one seed.
class Trainer {
 public:
  Trainer(TrainConfig config, std::uint64_t seed);

  /// One environment step from the current state, with a learner update
  /// when on the policy path and the buffer holds a batch.
  StepRecord train_step();
  /// Resets to the initial state and runs one full training episode.
  EpisodeMetrics episode_rollout();
  std::vector<EpisodeMetrics> train(
      int episodes, const std::function<void(const EpisodeMetrics&)>& on_episode = {});

  /// Rolls out one episode without learning, buffer writes or GP updates.
  /// Backup switching follows the same triggers.
  EpisodeMetrics evaluate_episode(bool deterministic);

  void reset();
  const Vector& state() const { return state_; }
  void set_state(const Vector& x);

  const TrainConfig& config() const { return config_; }
  const envs::Environment& env() const { return *env_; }
  agent::Learner& learner() { return *learner_; }
  const agent::Learner& learner() const { return *learner_; }
  buffer::ReplayBuffer& replay() { return replay_; }
  gp::GpResidualModel& gp() { return gp_; }
  const gp::GpResidualModel& gp() const { return gp_; }
  safety::DynamicsModel model() const;
  int episodes_done() const { return episodes_done_; }
  bool in_backup() const { return in_backup_; }
  /// Statistics of the most recent learner update.
  const agent::UpdateStats& last_update() const { return last_update_; }
  /// Forces every step onto the backup path (diagnostics and tests).
  void force_backup(bool on) { force_backup_ = on; }

 private:
  int episode_length() const;
  StepRecord advance(bool learn, bool deterministic);
  void finish_episode(bool learn);

  TrainConfig config_;
  std::unique_ptr<envs::Environment> env_;
  std::unique_ptr<agent::Learner> learner_;
  buffer::ReplayBuffer replay_;
  gp::GpResidualModel gp_;
  std::vector<Vector> gp_inputs_;
  std::vector<Vector> gp_targets_;
  long gp_counter_ = 0;

  Vector state_;
  std::deque<Vector> window_;
  bool in_backup_ = false;
  bool force_backup_ = false;
  int steps_in_backup_ = 0;
  Vector trap_state_;
  TriggerDecision decision_;
  agent::UpdateStats last_update_;
  int episodes_done_ = 0;
};

}  // namespace blac::trainer
