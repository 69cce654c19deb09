#include "blac/agent/losses.hpp"

#include <stdexcept>

namespace blac::agent {

using diff::Tape;
using diff::Var;

RowVector soft_bellman_target(const RowVector& rewards, const RowVector& min_target_q,
                              const RowVector& alpha_log_prob, double gamma) {
  if (rewards.size() != min_target_q.size() || rewards.size() != alpha_log_prob.size()) {
    throw std::invalid_argument("soft_bellman_target: size mismatch");
  }
  if (gamma == 0.0) return rewards;
  return rewards + gamma * (min_target_q - alpha_log_prob);
}

RowVector lyapunov_target(const RowVector& costs, const RowVector& target_next,
                          double gamma_c) {
  if (costs.size() != target_next.size()) {
    throw std::invalid_argument("lyapunov_target: size mismatch");
  }
  if (gamma_c == 0.0) return costs;
  return costs + gamma_c * target_next;
}

Var q_loss(Tape& tape, diff::Mlp& critic, const Matrix& inputs, const RowVector& target) {
  if (inputs.cols() == 0) throw std::invalid_argument("q_loss: empty batch");
  Var q = critic.apply(tape, tape.constant(inputs));
  return mean(square(q - tape.constant(Matrix(target))));
}

Var lyapunov_loss(Tape& tape, diff::Mlp& lyapunov, const Matrix& features,
                  const RowVector& target) {
  if (features.cols() == 0) throw std::invalid_argument("lyapunov_loss: empty batch");
  Var l = lyapunov.apply(tape, tape.constant(features));
  return mean(square(l - tape.constant(Matrix(target))));
}

Var alpha_loss(Tape& tape, EntropyTemp& temp, const RowVector& log_prob) {
  if (log_prob.size() == 0) throw std::invalid_argument("alpha_loss: empty batch");
  const double gap = (log_prob.array() + temp.target).mean();
  return scale(exp(tape.parameter(temp.log_alpha)), -gap);
}

ConstraintBatch make_constraint_batch(const safety::DynamicsModel& model,
                                      const LyapunovNet* lyapunov, const Matrix& states) {
  const envs::Environment& env = model.env();
  const Eigen::Index b = states.cols();
  ConstraintBatch out;
  out.states = states;
  out.features = feature_batch(env, states);
  out.base_next.resize(env.state_dim(), b);
  out.barrier_now.resize(static_cast<Eigen::Index>(env.spec().barriers.size()), b);
  out.input_matrices.reserve(b);
  for (Eigen::Index j = 0; j < b; ++j) {
    const Vector x = states.col(j);
    out.base_next.col(j) = model.drift_with_residual(x);
    out.input_matrices.push_back(env.input_matrix(x));
    out.barrier_now.col(j) = env.barrier_values(x);
  }
  if (lyapunov != nullptr) {
    out.lyapunov_now = lyapunov->online().apply_batch(out.features);
  }
  return out;
}

LagrangianTerms augmented_lagrangian(Tape& tape, PolicyNet& policy,
                                     const CriticPair& critics,
                                     const LyapunovNet& lyapunov,
                                     const EntropyTemp& temp,
                                     const LagrangianState& lagrangian,
                                     const envs::Environment& env,
                                     const ConstraintBatch& batch, const Matrix& xi,
                                     Variant variant, double clf_beta) {
  const Eigen::Index b = batch.states.cols();
  if (b == 0) throw std::invalid_argument("augmented_lagrangian: empty batch");
  const int n = env.state_dim();
  const auto& barriers = env.spec().barriers;
  const auto k = static_cast<Eigen::Index>(barriers.size());

  LagrangianTerms terms;
  Var features = tape.constant(batch.features);
  const PolicyNet::TapeSample s = policy.sample(tape, features, xi);
  terms.log_prob = s.log_prob;

  Var critic_in = concat_rows(features, s.squashed);
  Var q = minimum(critics.online(0).apply_frozen(tape, critic_in),
                  critics.online(1).apply_frozen(tape, critic_in));
  terms.value = mean(q - scale(s.log_prob, temp.alpha()));
  Var total = -terms.value;

  if (uses_cbf(variant) || uses_clf(variant)) {
    terms.predicted_next = columnwise(
        s.control, n, [&batch](Eigen::Index j, const Vector& u, Vector& out, Matrix& jac) {
          const Matrix& g = batch.input_matrices[j];
          out = batch.base_next.col(j) + g * u;
          jac = g;
        });
  }

  if (uses_cbf(variant)) {
    if (static_cast<std::size_t>(k) != lagrangian.lambda.size()) {
      throw std::invalid_argument("augmented_lagrangian: multiplier count mismatch");
    }
    Var h_next = columnwise(terms.predicted_next, k,
                            [&barriers, n](Eigen::Index, const Vector& x, Vector& out,
                                           Matrix& jac) {
                              const auto nb = static_cast<Eigen::Index>(barriers.size());
                              out.resize(nb);
                              jac.resize(nb, n);
                              for (Eigen::Index i = 0; i < nb; ++i) {
                                out[i] = barriers[i].value(x);
                                jac.row(i) = barriers[i].gradient(x).transpose();
                              }
                            });
    Matrix floor_now = batch.barrier_now;
    for (Eigen::Index i = 0; i < k; ++i) floor_now.row(i) *= 1.0 - barriers[i].decay;
    Var residual = relu(tape.constant(floor_now) - h_next);
    for (Eigen::Index i = 0; i < k; ++i) {
      Var r = mean(slice_rows(residual, i, 1));
      terms.cbf_means.push_back(r);
      total = total + scale(r, lagrangian.lambda[i]) +
              scale(square(r), 0.5 * lagrangian.rho_lambda[i]);
    }
  }

  if (uses_clf(variant)) {
    if (batch.lyapunov_now.size() != b) {
      throw std::invalid_argument("augmented_lagrangian: Lyapunov values missing");
    }
    const int f = env.feature_dim();
    Var next_features = columnwise(
        terms.predicted_next, f,
        [&env](Eigen::Index, const Vector& x, Vector& out, Matrix& jac) {
          env.features(x, out, &jac);
        });
    Var l_next = lyapunov.online().apply_frozen(tape, next_features);
    Var residual = relu(l_next - tape.constant(Matrix((1.0 - clf_beta) * batch.lyapunov_now)));
    terms.clf_mean = mean(residual);
    total = total + scale(terms.clf_mean, lagrangian.zeta) +
            scale(square(terms.clf_mean), 0.5 * lagrangian.rho_zeta);
  }
  terms.total = total;
  return terms;
}

}  // namespace blac::agent
