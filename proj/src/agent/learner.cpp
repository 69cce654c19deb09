#include "blac/agent/learner.hpp"

#include <stdexcept>

namespace blac::agent {

namespace {

void validate(const AgentConfig& c) {
  if (c.hidden.empty()) throw std::invalid_argument("agent: need at least one hidden layer");
  if (!(c.gamma >= 0.0 && c.gamma < 1.0)) throw std::invalid_argument("agent: gamma must lie in [0, 1)");
  if (!(c.gamma_c >= 0.0 && c.gamma_c < 1.0)) {
    throw std::invalid_argument("agent: gamma_c must lie in [0, 1)");
  }
  if (!(c.tau > 0.0 && c.tau <= 1.0)) throw std::invalid_argument("agent: tau must lie in (0, 1]");
  if (!(c.critic_lr > 0.0) || !(c.policy_lr > 0.0)) {
    throw std::invalid_argument("agent: learning rates must be > 0");
  }
  if (!(c.clf_beta > 0.0 && c.clf_beta < 1.0)) {
    throw std::invalid_argument("agent: clf_beta must lie in (0, 1)");
  }
}

diff::AdamOptions with_lr(double lr) {
  diff::AdamOptions o;
  o.learning_rate = lr;
  return o;
}

}  // namespace

Learner::Learner(const envs::Environment& env, AgentConfig config, std::uint64_t seed)
    : env_(&env),
      config_(std::move(config)),
      rng_(seed),
      critic_opt_(with_lr(config_.critic_lr)),
      lyapunov_opt_(with_lr(config_.critic_lr)),
      policy_opt_(with_lr(config_.policy_lr)),
      alpha_opt_(with_lr(config_.policy_lr)) {
  validate(config_);
  const int f = env.feature_dim();
  const int m = env.control_dim();
  policy_ = PolicyNet(f, config_.hidden, env.spec().bounds, rng_);
  critics_ = CriticPair(f, m, config_.hidden, rng_);
  lyapunov_ = LyapunovNet(f, config_.hidden, rng_);
  temp_ = EntropyTemp(config_.initial_alpha,
                      config_.entropy_target.value_or(-static_cast<double>(m)));
  lagrangian_ = LagrangianState(static_cast<int>(env.spec().barriers.size()),
                                config_.lagrangian);
}

Matrix Learner::gaussian(Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Matrix xi(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) xi(i, j) = n01(rng_);
  }
  return xi;
}

Vector Learner::act(const Vector& x, bool deterministic) {
  env_->validate_state(x);
  Vector f;
  env_->features(x, f, nullptr);
  Vector u = deterministic ? Vector(policy_.deterministic(f))
                           : Vector(policy_.sample(f, gaussian(policy_.control_dim(), 1)).control);
  // tanh saturates to exactly +-1 in floating point; keep u inside the box.
  return env_->spec().bounds.clip(u);
}

UpdateStats Learner::update(const buffer::Batch& batch, const safety::DynamicsModel& model) {
  const Eigen::Index b = batch.size();
  if (b == 0) throw std::invalid_argument("Learner::update: empty batch");
  const int m = policy_.control_dim();
  const double alpha = temp_.alpha();
  UpdateStats stats;

  const Matrix feats = feature_batch(*env_, batch.states);
  const Matrix feats_next = feature_batch(*env_, batch.next_states);

  // Critics.
  {
    const PolicyNet::Sample next = policy_.sample(feats_next, gaussian(m, b));
    Matrix next_in(feats_next.rows() + m, b);
    next_in << feats_next, next.squashed;
    const RowVector y = soft_bellman_target(batch.rewards, critics_.min_target(next_in),
                                            alpha * next.log_prob, config_.gamma);
    Matrix in(feats.rows() + m, b);
    in << feats, policy_.normalize(batch.controls);
    auto params = critics_.parameters();
    for (auto* p : params) p->zero_grad();
    diff::Tape tape;
    diff::Var loss = q_loss(tape, critics_.online(0), in, y) +
                     q_loss(tape, critics_.online(1), in, y);
    tape.backward(loss);
    critic_opt_.step(params);
    stats.critic_loss = loss.scalar();
  }

  // Lyapunov network.
  {
    const RowVector y = lyapunov_target(
        batch.costs, lyapunov_.target().apply_batch(feats_next), config_.gamma_c);
    auto params = lyapunov_.online().parameters();
    for (auto* p : params) p->zero_grad();
    diff::Tape tape;
    diff::Var loss = lyapunov_loss(tape, lyapunov_.online(), feats, y);
    tape.backward(loss);
    lyapunov_opt_.step(params);
    stats.lyapunov_loss = loss.scalar();
  }

  // Policy and temperature.
  const ConstraintBatch cb = make_constraint_batch(
      model, uses_clf(config_.variant) ? &lyapunov_ : nullptr, batch.states);
  diff::Tape tape;
  LagrangianTerms terms =
      augmented_lagrangian(tape, policy_, critics_, lyapunov_, temp_, lagrangian_, *env_, cb,
                           gaussian(m, b), config_.variant, config_.clf_beta);
  {
    auto params = policy_.net().parameters();
    for (auto* p : params) p->zero_grad();
    tape.backward(terms.total);
    stats.policy_objective = terms.total.scalar();
    const RowVector log_prob = terms.log_prob.value();
    policy_opt_.step(params);

    temp_.log_alpha.zero_grad();
    diff::Tape alpha_tape;
    diff::Var loss = alpha_loss(alpha_tape, temp_, log_prob);
    alpha_tape.backward(loss);
    diff::Parameter* ap = &temp_.log_alpha;
    alpha_opt_.step(std::span<diff::Parameter* const>(&ap, 1));
    stats.alpha_loss = loss.scalar();
    stats.alpha = temp_.alpha();
  }

  // Multipliers and penalties from the residuals at the updated policy,
  // with the same noise draws.
  if (uses_cbf(config_.variant)) {
    tape.replay();
    for (const diff::Var& r : terms.cbf_means) stats.cbf_means.push_back(r.scalar());
    std::optional<double> clf;
    if (uses_clf(config_.variant)) {
      stats.clf_mean = terms.clf_mean.scalar();
      clf = stats.clf_mean;
    }
    dual_update(lagrangian_, stats.cbf_means, clf);
  }

  polyak_update(critics_.online(0), critics_.target(0), config_.tau);
  polyak_update(critics_.online(1), critics_.target(1), config_.tau);
  polyak_update(lyapunov_.online(), lyapunov_.target(), config_.tau);
  ++updates_;
  return stats;
}

}  // namespace blac::agent
