#pragma once

#include <vector>

#include "blac/agent/lagrangian.hpp"
#include "blac/agent/networks.hpp"
#include "blac/diffcore/tape.hpp"
#include "blac/safety/constraints.hpp"

namespace blac::agent {

/// r + gamma (min_j Q_targ,j(x', u') - alpha log pi(u'|x')), per column.
RowVector soft_bellman_target(const RowVector& rewards, const RowVector& min_target_q,
                              const RowVector& alpha_log_prob, double gamma);

/// c + gamma_c L_targ(x'), per column.
RowVector lyapunov_target(const RowVector& costs, const RowVector& target_next,
                          double gamma_c);

/// mean((Q(inputs) - target)^2) with the critic weights tracked.
diff::Var q_loss(diff::Tape& tape, diff::Mlp& critic, const Matrix& inputs,
                 const RowVector& target);

/// mean((L(features) - target)^2) with the Lyapunov weights tracked.
diff::Var lyapunov_loss(diff::Tape& tape, diff::Mlp& lyapunov, const Matrix& features,
                        const RowVector& target);

/// -alpha mean(log_prob + H) with log alpha tracked.
diff::Var alpha_loss(diff::Tape& tape, EntropyTemp& temp, const RowVector& log_prob);

/// Per-state quantities of the constraint terms that do not depend on the
/// policy: predicted next state is base_next + G u.
struct ConstraintBatch {
  Matrix states;
  Matrix features;
  Matrix base_next;                    // f(x) + d_hat(x)
  std::vector<Matrix> input_matrices;  // g(x) per column
  Matrix barrier_now;                  // k x B
  RowVector lyapunov_now;              // L(x), empty when unused
};

ConstraintBatch make_constraint_batch(const safety::DynamicsModel& model,
                                      const LyapunovNet* lyapunov, const Matrix& states);

struct LagrangianTerms {
  diff::Var total;
  /// Batch estimate of V: mean(min_j Q_j(x, u) - alpha log pi(u|x)).
  diff::Var value;
  diff::Var log_prob;
  diff::Var predicted_next;
  std::vector<diff::Var> cbf_means;
  /// Invalid when the variant has no Lyapunov constraint.
  diff::Var clf_mean;
};

/// -V + sum_i (lambda_i R_i + rho_i / 2 R_i^2) + zeta S + rho_zeta / 2 S^2.
/// Only the policy weights are tracked; u is reparameterized with `xi`.
LagrangianTerms augmented_lagrangian(diff::Tape& tape, PolicyNet& policy,
                                     const CriticPair& critics,
                                     const LyapunovNet& lyapunov,
                                     const EntropyTemp& temp,
                                     const LagrangianState& lagrangian,
                                     const envs::Environment& env,
                                     const ConstraintBatch& batch, const Matrix& xi,
                                     Variant variant, double clf_beta);

}  // namespace blac::agent
