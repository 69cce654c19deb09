#pragma once

#include <vector>

#include "blac/envs/environment.hpp"

namespace blac::envs {

/// Point at distance `lookahead` ahead of a unicycle with state
/// (x1, x2, theta). Throws on negative lookahead.
Eigen::Vector2d lookahead_point(const Vector& x, double lookahead);

struct UnicycleParams {
  double dt = 0.1;
  int episode_length = 500;
  Eigen::Vector2d destination{2.5, 2.5};
  Eigen::Vector3d start{0.0, 0.0, 0.0};
  std::vector<Eigen::Vector2d> obstacles{{1.0, 1.0}, {1.8, 2.2}, {2.2, 1.4}};
  double safe_distance = 0.3;  // delta
  double lookahead = 0.1;      // l_p
  double preferred_speed = 1.0;
  double speed_weight = 0.1;     // K1
  double progress_weight = 30.0; // K2
  double residual_gain = 0.1;    // u_d = -gain * [cos(theta), 0]
  Eigen::Vector2d control_lower{-2.0, -3.0};
  Eigen::Vector2d control_upper{2.0, 3.0};
  double barrier_decay = 0.2;
};

/// Unicycle kinematics x' = x + G(x)(u + u_d) with G(x) = dt [[cos, 0],
/// [sin, 0], [0, 1]] and a hidden speed loss u_d = -0.1 [cos(theta), 0].
class UnicycleEnv final : public Environment {
 public:
  explicit UnicycleEnv(UnicycleParams params = {});

  const UnicycleParams& params() const { return params_; }

  Vector initial_state() const override;
  Vector drift(const Vector& x) const override;
  Matrix input_matrix(const Vector& x) const override;
  Vector step(const Vector& x, const Vector& u) const override;
  StepFeedback feedback(const Vector& x, const Vector& u,
                        const Vector& next) const override;

  int feature_dim() const override { return 4; }
  void features(const Vector& x, Vector& out, Matrix* jacobian) const override;

  std::vector<int> residual_dims() const override { return {0, 1, 2}; }
  Vector gp_input(const Vector& x) const override;

  double distance_to_destination(const Vector& x) const;

 private:
  UnicycleParams params_;
};

}  // namespace blac::envs
