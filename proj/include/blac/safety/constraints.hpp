#pragma once

#include <functional>

#include "blac/diffcore/types.hpp"
#include "blac/envs/environment.hpp"
#include "blac/gp/gp_residual.hpp"

namespace blac::safety {

/// Scalar function of the state with its gradient; used for the learned
/// Lyapunov function.
struct StateFunction {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
};

/// Nominal model of an environment corrected by a GP residual estimate.
/// A null GP means the residual estimate is zero.
class DynamicsModel {
 public:
  DynamicsModel(const envs::Environment& env, const gp::GpResidualModel* gp);

  const envs::Environment& env() const { return *env_; }
  const gp::GpResidualModel* gp() const { return gp_; }

  /// GP mean embedded into a full state vector.
  Vector residual_mean(const Vector& x) const;
  /// GP standard deviation embedded into a full state vector (zero for
  /// unmodeled components).
  Vector residual_std(const Vector& x) const;

  /// f(x) + d_hat(x): the part of the predicted next state that does not
  /// depend on the control.
  Vector drift_with_residual(const Vector& x) const;

  /// x_hat' = f(x) + g(x) u + d_hat(x).
  Vector predict_next(const Vector& x, const Vector& u) const;

 private:
  const envs::Environment* env_;
  const gp::GpResidualModel* gp_;
};

/// max(0, h(x) - h(x_next) - eta h(x)).
double cbf_residual(const envs::BarrierSpec& barrier, const Vector& x,
                    const Vector& x_next);
/// Same, from the barrier values.
double cbf_residual(double h_now, double h_next, double decay);

/// max(0, L(x_next) - L(x) + beta L(x)).
double clf_residual(const std::function<double(const Vector&)>& lyapunov,
                    const Vector& x, const Vector& x_next, double beta);
double clf_residual(double l_now, double l_next, double beta);

/// The inequality forms the residuals encode.
bool cbf_condition_holds(double h_now, double h_next, double decay);
bool clf_condition_holds(double l_now, double l_next, double beta);

}  // namespace blac::safety
