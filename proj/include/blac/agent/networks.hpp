#pragma once

#include <random>
#include <vector>

#include "blac/diffcore/mlp.hpp"
#include "blac/diffcore/tape.hpp"
#include "blac/envs/environment.hpp"
#include "blac/safety/constraints.hpp"

namespace blac::agent {

/// Network inputs for each column of `states`.
Matrix feature_batch(const envs::Environment& env, const Matrix& states);

/// Squashed Gaussian policy: u = c + h * tanh(mu + sigma * xi) for the
/// control box with center c and half-width h.
class PolicyNet {
 public:
  static constexpr double kLogStdMin = -20.0;
  static constexpr double kLogStdMax = 2.0;

  PolicyNet() = default;
  PolicyNet(int feature_dim, const std::vector<int>& hidden,
            envs::ControlBox box, std::mt19937_64& rng);
  PolicyNet(diff::Mlp net, envs::ControlBox box);

  int control_dim() const { return box_.dim(); }
  const envs::ControlBox& box() const { return box_; }
  diff::Mlp& net() { return net_; }
  const diff::Mlp& net() const { return net_; }

  struct Sample {
    Matrix control;     // m x B, in the box
    Matrix squashed;    // m x B, tanh output in [-1, 1]
    RowVector log_prob;  // 1 x B
  };
  /// Numeric sampling for the columns of `features` with noise `xi` (m x B).
  Sample sample(const Matrix& features, const Matrix& xi) const;
  /// tanh of the mean, rescaled into the box.
  Matrix deterministic(const Matrix& features) const;

  struct TapeSample {
    diff::Var control;
    diff::Var squashed;
    diff::Var log_prob;
  };
  /// Reparameterized sample recorded on `tape` with the weights tracked.
  TapeSample sample(diff::Tape& tape, diff::Var features, const Matrix& xi);

  /// Maps controls into [-1, 1]^m.
  Matrix normalize(const Matrix& controls) const;

 private:
  diff::Mlp net_;
  envs::ControlBox box_;
};

/// Twin action-value networks Q(features, normalized control) with targets.
class CriticPair {
 public:
  CriticPair() = default;
  CriticPair(int feature_dim, int control_dim, const std::vector<int>& hidden,
             std::mt19937_64& rng);

  diff::Mlp& online(int i) { return online_.at(i); }
  const diff::Mlp& online(int i) const { return online_.at(i); }
  diff::Mlp& target(int i) { return target_.at(i); }
  const diff::Mlp& target(int i) const { return target_.at(i); }

  /// Elementwise min of the two target critics, 1 x B.
  RowVector min_target(const Matrix& inputs) const;
  /// Elementwise min of the two online critics, 1 x B.
  RowVector min_online(const Matrix& inputs) const;

  std::vector<diff::Parameter*> parameters();

 private:
  std::vector<diff::Mlp> online_;
  std::vector<diff::Mlp> target_;
};

/// Rectified-output network of the state features with a target copy.
class LyapunovNet {
 public:
  /// Initial output bias of the online and target networks.
  static constexpr double kOutputBias = 1.0;

  LyapunovNet() = default;
  LyapunovNet(int feature_dim, const std::vector<int>& hidden, std::mt19937_64& rng);

  diff::Mlp& online() { return online_; }
  const diff::Mlp& online() const { return online_; }
  diff::Mlp& target() { return target_; }
  const diff::Mlp& target() const { return target_; }

  double value(const envs::Environment& env, const Vector& x) const;
  /// Gradient with respect to the state, through the feature map.
  Vector gradient(const envs::Environment& env, const Vector& x) const;
  /// View usable by the safety module. `env` must outlive the result.
  safety::StateFunction as_state_function(const envs::Environment& env) const;

 private:
  diff::Mlp online_;
  diff::Mlp target_;
};

/// Temperature alpha = exp(log_alpha) with entropy target H.
struct EntropyTemp {
  EntropyTemp() = default;
  EntropyTemp(double initial_alpha, double target);

  double alpha() const;
  double target = 0.0;
  diff::Parameter log_alpha{Matrix::Zero(1, 1)};
};

/// targ <- (1 - tau) targ + tau online for every parameter.
/// Throws std::invalid_argument on shape mismatch or tau outside (0, 1].
void polyak_update(const diff::Mlp& online, diff::Mlp& target, double tau);

}  // namespace blac::agent
