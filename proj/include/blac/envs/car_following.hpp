#pragma once

#include <array>
#include <vector>

#include "blac/envs/environment.hpp"

namespace blac::envs {

struct CarFollowingParams {
  double dt = 0.1;
  int episode_length = 500;
  double preferred_speed = 3.0;     // v_s
  double speed_gain = 4.0;          // k_v
  double brake_gain = 20.0;         // k_b
  double lead_amplitude = 4.0;      // car 1 tracks v_s - amplitude * sin(t)
  double residual = 0.1;            // d_i for cars 1, 2, 3, 5
  double brake_distance = 6.5;      // cars 2 and 3 vs predecessor
  double rear_brake_distance = 13.0;  // car 5 vs car 3
  double safe_distance = 1.5;       // delta
  double desired_gap = 9.5;
  double band_lower = 9.0;
  double band_upper = 10.0;
  double band_bonus = 1.5;
  double initial_spacing = 9.5;
  double control_lower = 0.0;
  double control_upper = 6.0;
  double barrier_decay = 0.2;
};

/// Five cars in a row; the controller sets the velocity of car 4.
///
/// State layout: [p1, v1, p2, v2, p3, v3, p4, v4, p5, v5, t]. Cars 1, 2, 3
/// and 5 integrate p' = p + v dt, v' = v + (1 + d) a dt where the (1 + d)
/// factor is hidden from the nominal model. Car 4 is p' = p + u dt, v' = u.
class CarFollowingEnv final : public Environment {
 public:
  static constexpr int kStateDim = 11;
  static constexpr int kTimeIndex = 10;
  static constexpr int position_index(int car) { return 2 * (car - 1); }
  static constexpr int velocity_index(int car) { return 2 * (car - 1) + 1; }

  explicit CarFollowingEnv(CarFollowingParams params = {});

  const CarFollowingParams& params() const { return params_; }

  /// Accelerations of cars 1..5 (entry for car 4 is zero).
  std::array<double, 5> accelerations(const Vector& x) const;

  Vector initial_state() const override;
  Vector drift(const Vector& x) const override;
  Matrix input_matrix(const Vector& x) const override;
  Vector step(const Vector& x, const Vector& u) const override;
  StepFeedback feedback(const Vector& x, const Vector& u,
                        const Vector& next) const override;

  int feature_dim() const override { return 11; }
  void features(const Vector& x, Vector& out, Matrix* jacobian) const override;

  std::vector<int> residual_dims() const override {
    return {position_index(4), velocity_index(4)};
  }
  Vector gp_input(const Vector& x) const override;

  /// Gap p3 - p4 between car 3 and the controlled car.
  static double front_gap(const Vector& x) {
    return x[position_index(3)] - x[position_index(4)];
  }
  /// Gap p4 - p5 between the controlled car and car 5.
  static double rear_gap(const Vector& x) {
    return x[position_index(4)] - x[position_index(5)];
  }

 private:
  Vector integrate(const Vector& x, const Vector& u, double residual) const;

  CarFollowingParams params_;
};

}  // namespace blac::envs
