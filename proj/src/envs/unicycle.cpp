#include "blac/envs/unicycle.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace blac::envs {

Eigen::Vector2d lookahead_point(const Vector& x, double lookahead) {
  if (lookahead < 0.0) {
    throw std::invalid_argument("lookahead_point: negative lookahead distance");
  }
  return {x[0] + lookahead * std::cos(x[2]), x[1] + lookahead * std::sin(x[2])};
}

namespace {

EnvSpec make_spec(const UnicycleParams& p) {
  if (p.safe_distance < 0.0) {
    throw std::invalid_argument("unicycle: safe distance must be >= 0");
  }
  if (p.lookahead < 0.0) {
    throw std::invalid_argument("unicycle: lookahead must be >= 0");
  }
  EnvSpec spec;
  spec.id = "unicycle";
  spec.state_dim = 3;
  spec.control_dim = 2;
  spec.bounds.lower = p.control_lower;
  spec.bounds.upper = p.control_upper;
  spec.dt = p.dt;
  spec.episode_length = p.episode_length;
  spec.desired = p.destination;
  const double lp = p.lookahead;
  const double d2 = p.safe_distance * p.safe_distance;
  for (std::size_t i = 0; i < p.obstacles.size(); ++i) {
    const Eigen::Vector2d obs = p.obstacles[i];
    BarrierSpec b;
    b.label = "obstacle_" + std::to_string(i + 1);
    b.decay = p.barrier_decay;
    b.value = [obs, lp, d2](const Vector& x) {
      return 0.5 * ((lookahead_point(x, lp) - obs).squaredNorm() - d2);
    };
    b.gradient = [obs, lp](const Vector& x) {
      const Eigen::Vector2d r = lookahead_point(x, lp) - obs;
      Vector g(3);
      g << r.x(), r.y(),
          lp * (-r.x() * std::sin(x[2]) + r.y() * std::cos(x[2]));
      return g;
    };
    spec.barriers.push_back(std::move(b));
  }
  return spec;
}

}  // namespace

UnicycleEnv::UnicycleEnv(UnicycleParams params)
    : Environment(make_spec(params)), params_(std::move(params)) {}

Vector UnicycleEnv::initial_state() const { return params_.start; }

Vector UnicycleEnv::drift(const Vector& x) const {
  validate_state(x);
  return x;
}

Matrix UnicycleEnv::input_matrix(const Vector& x) const {
  validate_state(x);
  Matrix g = Matrix::Zero(3, 2);
  g(0, 0) = params_.dt * std::cos(x[2]);
  g(1, 0) = params_.dt * std::sin(x[2]);
  g(2, 1) = params_.dt;
  return g;
}

Vector UnicycleEnv::step(const Vector& x, const Vector& u) const {
  validate_control(u);
  Vector ud(2);
  ud << -params_.residual_gain * std::cos(x[2]), 0.0;
  return drift(x) + input_matrix(x) * (u + ud);
}

double UnicycleEnv::distance_to_destination(const Vector& x) const {
  return (lookahead_point(x, params_.lookahead) - params_.destination).norm();
}

StepFeedback UnicycleEnv::feedback(const Vector& x, const Vector& u,
                                   const Vector& next) const {
  validate_state(x);
  validate_state(next);
  StepFeedback fb;
  fb.next_state = next;
  const double progress =
      distance_to_destination(x) - distance_to_destination(next);
  const double dv = u[0] - params_.preferred_speed;
  fb.reward = -params_.speed_weight * dv * dv + params_.progress_weight * progress;
  fb.cost = distance_to_destination(next);
  fb.barrier_values = barrier_values(next);
  fb.violation = fb.barrier_values.size() > 0 && fb.barrier_values.minCoeff() < 0.0;
  return fb;
}

void UnicycleEnv::features(const Vector& x, Vector& out,
                           Matrix* jacobian) const {
  const double c = std::cos(x[2]), s = std::sin(x[2]);
  out.resize(4);
  out << x[0], x[1], c, s;
  if (jacobian != nullptr) {
    jacobian->setZero(4, 3);
    (*jacobian)(0, 0) = 1.0;
    (*jacobian)(1, 1) = 1.0;
    (*jacobian)(2, 2) = -s;
    (*jacobian)(3, 2) = c;
  }
}

Vector UnicycleEnv::gp_input(const Vector& x) const {
  Vector z(4);
  z << x[0], x[1], std::cos(x[2]), std::sin(x[2]);
  return z;
}

}  // namespace blac::envs
