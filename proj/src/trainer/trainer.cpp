#include "blac/trainer/trainer.hpp"

#include <spdlog/spdlog.h>

#include <stdexcept>

namespace blac::trainer {

namespace {

void require(bool ok, const std::string& field, const std::string& rule) {
  if (!ok) throw std::invalid_argument(field + ": " + rule);
}

const envs::UnicycleEnv* as_unicycle(const envs::Environment& env) {
  return dynamic_cast<const envs::UnicycleEnv*>(&env);
}

const envs::CarFollowingEnv* as_car(const envs::Environment& env) {
  return dynamic_cast<const envs::CarFollowingEnv*>(&env);
}

Vector backup_nominal(const envs::Environment& env) {
  if (as_car(env) != nullptr) return env.spec().bounds.clip(Vector::Zero(1));
  return env.spec().bounds.upper;
}

gp::GpResidualModel make_gp(const envs::Environment& env, const GpSettings& s) {
  const Vector probe = env.gp_input(env.initial_state());
  return gp::GpResidualModel(static_cast<int>(probe.size()),
                             static_cast<int>(env.residual_dims().size()), s.model);
}

}  // namespace

void validate(const TrainConfig& c) {
  require(c.env_id == "unicycle" || c.env_id == "car_following", "env",
          "must be 'unicycle' or 'car_following'");
  require(c.episodes >= 1, "train.episodes", "must be >= 1");
  require(c.steps_per_episode >= 0, "train.steps_per_episode", "must be >= 0");
  require(c.batch_size >= 1, "train.batch_size", "must be >= 1");
  require(c.buffer_capacity >= c.batch_size, "train.buffer_capacity",
          "must be >= batch_size");
  require(c.trigger.window >= 1, "trigger.window", "must be >= 1");
  require(c.trigger.trap_displacement > 0.0, "trigger.trap_displacement", "must be > 0");
  require(c.trigger.trap_margin > 0.0, "trigger.trap_margin", "must be > 0");
  require(c.trigger.resume_distance > 0.0, "trigger.resume_distance", "must be > 0");
  require(c.trigger.max_backup_steps >= 1, "trigger.max_backup_steps", "must be >= 1");
  require(c.trigger.proximity_offset > 0.0, "trigger.proximity_offset", "must be > 0");
  require(c.trigger.hysteresis > 0.0, "trigger.hysteresis", "must be > 0");
  require(c.backup.slack_penalty > 0.0, "backup.slack_penalty", "must be > 0");
  require(c.backup.kappa >= 0.0, "backup.kappa", "must be >= 0");
  require(c.backup.sigma_margin >= 0.0, "backup.sigma_margin", "must be >= 0");
  require((c.backup.q_diagonal.array() >= 0.0).all(), "backup.q_diagonal",
          "entries must be >= 0");
  require(c.gp.stride >= 1, "gp.stride", "must be >= 1");
  require(c.gp.freeze_after_episodes >= 0, "gp.freeze_after_episodes", "must be >= 0");
  require(c.gp.model.capacity >= 1, "gp.capacity", "must be >= 1");
  require(c.gp.model.kernel.signal_variance > 0.0, "gp.signal_variance", "must be > 0");
  require((c.gp.model.kernel.length_scales.array() > 0.0).all(), "gp.length_scale",
          "must be > 0");
  require(c.gp.model.kernel.noise_variance >= 0.0, "gp.noise_variance", "must be >= 0");
}

std::unique_ptr<envs::Environment> make_environment(const TrainConfig& config) {
  if (config.env_id == "unicycle") {
    return std::make_unique<envs::UnicycleEnv>(config.unicycle);
  }
  if (config.env_id == "car_following") {
    return std::make_unique<envs::CarFollowingEnv>(config.car_following);
  }
  throw std::invalid_argument("env: unknown environment '" + config.env_id + "'");
}

TriggerDecision backup_trigger(const envs::Environment& env, const TriggerConfig& config,
                               const std::deque<Vector>& window, const Vector& x) {
  TriggerDecision d;
  d.u_nominal = backup_nominal(env);
  if (static_cast<int>(window.size()) < config.window) return d;
  if (const auto* uni = as_unicycle(env)) {
    const double lp = uni->params().lookahead;
    const double moved =
        (envs::lookahead_point(x, lp) - envs::lookahead_point(window.front(), lp)).norm();
    d.use_backup = moved < config.trap_displacement && env.min_barrier(x) < config.trap_margin;
  } else if (const auto* car = as_car(env)) {
    d.use_backup = envs::CarFollowingEnv::rear_gap(x) <
                   car->params().safe_distance + config.proximity_offset;
  }
  return d;
}

bool backup_release(const envs::Environment& env, const TriggerConfig& config,
                    const Vector& x, const Vector& trap_state, int steps_in_backup) {
  if (const auto* uni = as_unicycle(env)) {
    const double lp = uni->params().lookahead;
    const double moved =
        (envs::lookahead_point(x, lp) - envs::lookahead_point(trap_state, lp)).norm();
    return moved > config.resume_distance || steps_in_backup > config.max_backup_steps;
  }
  if (const auto* car = as_car(env)) {
    return envs::CarFollowingEnv::rear_gap(x) >=
           car->params().safe_distance + config.proximity_offset + config.hysteresis;
  }
  return true;
}

double distance_to_goal(const envs::Environment& env, const Vector& x) {
  if (const auto* uni = as_unicycle(env)) return uni->distance_to_destination(x);
  if (const auto* car = as_car(env)) {
    return std::abs(envs::CarFollowingEnv::front_gap(x) - car->params().desired_gap);
  }
  return 0.0;
}

Trainer::Trainer(TrainConfig config, std::uint64_t seed)
    : config_((validate(config), std::move(config))),
      env_(make_environment(config_)),
      learner_(std::make_unique<agent::Learner>(*env_, config_.agent, seed)),
      replay_(config_.buffer_capacity, env_->state_dim(), env_->control_dim(),
              seed ^ 0x9e3779b97f4a7c15ULL),
      gp_(make_gp(*env_, config_.gp)) {
  reset();
}

safety::DynamicsModel Trainer::model() const {
  return safety::DynamicsModel(*env_, config_.gp.enabled ? &gp_ : nullptr);
}

int Trainer::episode_length() const {
  return config_.steps_per_episode > 0 ? config_.steps_per_episode
                                       : env_->spec().episode_length;
}

void Trainer::reset() {
  set_state(env_->initial_state());
}

void Trainer::set_state(const Vector& x) {
  env_->validate_state(x);
  state_ = x;
  window_.clear();
  in_backup_ = false;
  steps_in_backup_ = 0;
}

StepRecord Trainer::advance(bool learn, bool deterministic) {
  StepRecord rec;
  rec.state = state_;
  const Vector& x = state_;

  if (force_backup_) {
    decision_ = {true, backup_nominal(*env_)};
    rec.backup = true;
  } else if (config_.backup_enabled) {
    if (in_backup_ &&
        backup_release(*env_, config_.trigger, x, trap_state_, steps_in_backup_)) {
      in_backup_ = false;
      window_.clear();
    }
    if (!in_backup_) {
      TriggerDecision d = backup_trigger(*env_, config_.trigger, window_, x);
      if (d.use_backup) {
        in_backup_ = true;
        steps_in_backup_ = 0;
        trap_state_ = x;
        decision_ = std::move(d);
      }
    }
    rec.backup = in_backup_;
  }

  if (rec.backup) {
    const safety::DynamicsModel dyn = model();
    const safety::StateFunction lyap = learner_->lyapunov().as_state_function(*env_);
    try {
      rec.control = safety::backup_solve(config_.backup, dyn, &lyap, x, decision_.u_nominal)
                        .u_actual;
    } catch (const safety::BackupSolveError& e) {
      spdlog::warn("backup controller failed ({}); applying the nominal control", e.what());
      rec.control = env_->spec().bounds.clip(decision_.u_nominal);
    }
    ++steps_in_backup_;
  } else {
    rec.control = learner_->act(x, deterministic);
  }

  const Vector next = env_->step(x, rec.control);
  rec.feedback = env_->feedback(x, rec.control, next);

  if (learn) {
    if (!rec.backup) {
      replay_.push({x, rec.control, rec.feedback.reward, rec.feedback.cost, next});
      if (replay_.size() >= config_.batch_size) {
        last_update_ = learner_->update(replay_.sample_batch(config_.batch_size), model());
        rec.updated = true;
      }
    }
    if (config_.gp.enabled && !gp_.frozen() && gp_counter_++ % config_.gp.stride == 0) {
      const Vector residual = next - env_->nominal_step(x, rec.control);
      const auto dims = env_->residual_dims();
      Vector target(static_cast<Eigen::Index>(dims.size()));
      for (std::size_t i = 0; i < dims.size(); ++i) target[i] = residual[dims[i]];
      gp_inputs_.push_back(env_->gp_input(x));
      gp_targets_.push_back(std::move(target));
    }
  }

  window_.push_back(x);
  while (static_cast<int>(window_.size()) > config_.trigger.window) window_.pop_front();
  state_ = next;
  return rec;
}

StepRecord Trainer::train_step() { return advance(true, false); }

void Trainer::finish_episode(bool learn) {
  if (!learn) return;
  ++episodes_done_;
  if (config_.gp.enabled && !gp_.frozen()) {
    if (!gp_inputs_.empty()) gp_.fit(gp_inputs_, gp_targets_);
    if (episodes_done_ >= config_.gp.freeze_after_episodes) gp_.freeze();
  }
  gp_inputs_.clear();
  gp_targets_.clear();
}

namespace {

template <typename Step>
EpisodeMetrics rollout(int length, const envs::Environment& env, Step step) {
  EpisodeMetrics m;
  Vector last;
  for (int t = 0; t < length; ++t) {
    const StepRecord r = step();
    m.steps += 1;
    m.reward += r.feedback.reward;
    m.cost += r.feedback.cost;
    m.violations += r.feedback.violation ? 1 : 0;
    m.backup_steps += r.backup ? 1 : 0;
    last = r.feedback.next_state;
  }
  if (length > 0) m.final_distance = distance_to_goal(env, last);
  return m;
}

}  // namespace

EpisodeMetrics Trainer::episode_rollout() {
  reset();
  EpisodeMetrics m = rollout(episode_length(), *env_, [this] { return advance(true, false); });
  finish_episode(true);
  m.episode = episodes_done_;
  return m;
}

std::vector<EpisodeMetrics> Trainer::train(
    int episodes, const std::function<void(const EpisodeMetrics&)>& on_episode) {
  std::vector<EpisodeMetrics> out;
  out.reserve(episodes);
  for (int k = 0; k < episodes; ++k) {
    out.push_back(episode_rollout());
    if (on_episode) on_episode(out.back());
  }
  return out;
}

EpisodeMetrics Trainer::evaluate_episode(bool deterministic) {
  reset();
  EpisodeMetrics m = rollout(episode_length(), *env_,
                             [this, deterministic] { return advance(false, deterministic); });
  m.episode = episodes_done_;
  return m;
}

}  // namespace blac::trainer
