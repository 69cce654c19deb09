#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "blac/diffcore/types.hpp"

namespace blac::envs {

/// One control barrier function h with decay rate eta. The safe set is
/// {x : h(x) >= 0}; the discrete-time condition is h(x') - h(x) >= -eta h(x).
struct BarrierSpec {
  std::string label;
  double decay = 0.2;
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
};

/// Axis-aligned box of admissible controls.
struct ControlBox {
  Vector lower;
  Vector upper;

  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Vector& u, double tol = 1e-9) const;
  Vector clip(const Vector& u) const;
  Vector center() const { return 0.5 * (lower + upper); }
  Vector half_width() const { return 0.5 * (upper - lower); }
};

struct EnvSpec {
  std::string id;
  int state_dim = 0;
  int control_dim = 0;
  ControlBox bounds;
  double dt = 0.1;
  int episode_length = 500;
  /// Unicycle: destination position. Car following: desired gap.
  Vector desired;
  std::vector<BarrierSpec> barriers;
};

struct StepFeedback {
  Vector next_state;
  double reward = 0.0;
  double cost = 0.0;
  Vector barrier_values;
  bool violation = false;
};

/// Discrete control-affine system x' = f(x) + g(x) u + d(x) where f and g
/// are known and d is hidden inside `step`.
class Environment {
 public:
  explicit Environment(EnvSpec spec);
  virtual ~Environment() = default;

  const EnvSpec& spec() const { return spec_; }
  const std::string& id() const { return spec_.id; }
  int state_dim() const { return spec_.state_dim; }
  int control_dim() const { return spec_.control_dim; }

  virtual Vector initial_state() const = 0;

  /// Nominal drift f(x).
  virtual Vector drift(const Vector& x) const = 0;
  /// Nominal input matrix g(x), state_dim x control_dim.
  virtual Matrix input_matrix(const Vector& x) const = 0;
  /// f(x) + g(x) u.
  Vector nominal_step(const Vector& x, const Vector& u) const;
  /// True transition including the hidden residual.
  virtual Vector step(const Vector& x, const Vector& u) const = 0;

  virtual StepFeedback feedback(const Vector& x, const Vector& u,
                                const Vector& next) const = 0;

  /// Smooth map from state to network inputs. When `jacobian` is non-null it
  /// receives d(features)/dx.
  virtual int feature_dim() const = 0;
  virtual void features(const Vector& x, Vector& out,
                        Matrix* jacobian) const = 0;

  /// State components whose residual is modeled by the GP.
  virtual std::vector<int> residual_dims() const = 0;
  /// Regression input for the GP at state x.
  virtual Vector gp_input(const Vector& x) const = 0;

  Vector barrier_values(const Vector& x) const;
  double min_barrier(const Vector& x) const;

  /// Throws std::invalid_argument on wrong size or non-finite entries.
  void validate_state(const Vector& x) const;
  /// Throws std::invalid_argument on wrong size, non-finite entries, or a
  /// control outside the box.
  void validate_control(const Vector& u) const;

 protected:
  EnvSpec spec_;
};

}  // namespace blac::envs
