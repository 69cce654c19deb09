#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "blac/agent/lagrangian.hpp"
#include "blac/agent/losses.hpp"
#include "blac/agent/networks.hpp"
#include "blac/buffer/replay_buffer.hpp"
#include "blac/diffcore/adam.hpp"

namespace blac::agent {

struct AgentConfig {
  Variant variant = Variant::kBlac;
  std::vector<int> hidden{64, 64};
  double gamma = 0.99;
  double gamma_c = 0.995;
  double tau = 0.005;
  double critic_lr = 3e-4;  // eta_1, critics and Lyapunov network
  double policy_lr = 3e-4;  // eta_2, policy and temperature
  double clf_beta = 0.1;
  double initial_alpha = 1.0;
  /// Entropy target; defaults to -(control dim).
  std::optional<double> entropy_target;
  LagrangianOptions lagrangian;
};

struct UpdateStats {
  double critic_loss = 0.0;
  double lyapunov_loss = 0.0;
  double policy_objective = 0.0;
  double alpha_loss = 0.0;
  double alpha = 0.0;
  /// Residual means after the policy step, as used by the dual update.
  std::vector<double> cbf_means;
  double clf_mean = 0.0;
};

/// Policy, critics, Lyapunov network, temperature and multipliers together
/// with their optimizers.
class Learner {
 public:
  Learner(const envs::Environment& env, AgentConfig config, std::uint64_t seed);

  /// Stochastic draw from the policy, or tanh of the mean when
  /// `deterministic`. Always inside the control box.
  Vector act(const Vector& x, bool deterministic);

  /// One update in the order: Lyapunov network and critics, then policy
  /// and temperature, then multipliers and penalties, then target networks.
  UpdateStats update(const buffer::Batch& batch, const safety::DynamicsModel& model);

  const AgentConfig& config() const { return config_; }
  const envs::Environment& env() const { return *env_; }
  PolicyNet& policy() { return policy_; }
  const PolicyNet& policy() const { return policy_; }
  CriticPair& critics() { return critics_; }
  const CriticPair& critics() const { return critics_; }
  LyapunovNet& lyapunov() { return lyapunov_; }
  const LyapunovNet& lyapunov() const { return lyapunov_; }
  EntropyTemp& temperature() { return temp_; }
  const EntropyTemp& temperature() const { return temp_; }
  LagrangianState& lagrangian() { return lagrangian_; }
  const LagrangianState& lagrangian() const { return lagrangian_; }
  std::mt19937_64& rng() { return rng_; }
  long updates() const { return updates_; }

 private:
  Matrix gaussian(Eigen::Index rows, Eigen::Index cols);

  const envs::Environment* env_;
  AgentConfig config_;
  std::mt19937_64 rng_;
  PolicyNet policy_;
  CriticPair critics_;
  LyapunovNet lyapunov_;
  EntropyTemp temp_;
  LagrangianState lagrangian_;
  diff::Adam critic_opt_;
  diff::Adam lyapunov_opt_;
  diff::Adam policy_opt_;
  diff::Adam alpha_opt_;
  long updates_ = 0;
};

}  // namespace blac::agent
