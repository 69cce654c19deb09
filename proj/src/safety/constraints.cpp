#include "blac/safety/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace blac::safety {

DynamicsModel::DynamicsModel(const envs::Environment& env,
                             const gp::GpResidualModel* gp)
    : env_(&env), gp_(gp) {
  if (gp_ != nullptr &&
      gp_->output_dim() != static_cast<int>(env.residual_dims().size())) {
    throw std::invalid_argument(
        "DynamicsModel: GP output dimension does not match the environment");
  }
}

Vector DynamicsModel::residual_mean(const Vector& x) const {
  Vector d = Vector::Zero(env_->state_dim());
  if (gp_ == nullptr || gp_->size() == 0) return d;
  const Vector mean = gp_->predict_mean(env_->gp_input(x));
  const auto dims = env_->residual_dims();
  for (std::size_t k = 0; k < dims.size(); ++k) d[dims[k]] = mean[k];
  return d;
}

Vector DynamicsModel::residual_std(const Vector& x) const {
  Vector s = Vector::Zero(env_->state_dim());
  if (gp_ == nullptr) return s;
  const gp::GpPrediction p = gp_->predict(env_->gp_input(x));
  const auto dims = env_->residual_dims();
  for (std::size_t k = 0; k < dims.size(); ++k) {
    s[dims[k]] = std::sqrt(p.variance[k]);
  }
  return s;
}

Vector DynamicsModel::drift_with_residual(const Vector& x) const {
  return env_->drift(x) + residual_mean(x);
}

Vector DynamicsModel::predict_next(const Vector& x, const Vector& u) const {
  return drift_with_residual(x) + env_->input_matrix(x) * u;
}

double cbf_residual(double h_now, double h_next, double decay) {
  return std::max(0.0, h_now - h_next - decay * h_now);
}

double cbf_residual(const envs::BarrierSpec& barrier, const Vector& x,
                    const Vector& x_next) {
  return cbf_residual(barrier.value(x), barrier.value(x_next), barrier.decay);
}

double clf_residual(double l_now, double l_next, double beta) {
  return std::max(0.0, l_next - l_now + beta * l_now);
}

double clf_residual(const std::function<double(const Vector&)>& lyapunov,
                    const Vector& x, const Vector& x_next, double beta) {
  if (!(beta > 0.0 && beta < 1.0)) {
    throw std::invalid_argument("clf_residual: beta must lie in (0, 1)");
  }
  return clf_residual(lyapunov(x), lyapunov(x_next), beta);
}

bool cbf_condition_holds(double h_now, double h_next, double decay) {
  return h_next - h_now >= -decay * h_now;
}

bool clf_condition_holds(double l_now, double l_next, double beta) {
  return l_next - l_now <= -beta * l_now;
}

}  // namespace blac::safety
