#include "blac/envs/car_following.hpp"

#include <cmath>
#include <stdexcept>

namespace blac::envs {

namespace {

EnvSpec make_spec(const CarFollowingParams& p) {
  if (p.safe_distance < 0.0) {
    throw std::invalid_argument("car_following: safe distance must be >= 0");
  }
  EnvSpec spec;
  spec.id = "car_following";
  spec.state_dim = CarFollowingEnv::kStateDim;
  spec.control_dim = 1;
  spec.bounds.lower = Vector::Constant(1, p.control_lower);
  spec.bounds.upper = Vector::Constant(1, p.control_upper);
  spec.dt = p.dt;
  spec.episode_length = p.episode_length;
  spec.desired = Vector::Constant(1, p.desired_gap);
  const double delta = p.safe_distance;
  const int i3 = CarFollowingEnv::position_index(3);
  const int i4 = CarFollowingEnv::position_index(4);
  const int i5 = CarFollowingEnv::position_index(5);

  BarrierSpec front;
  front.label = "front_gap";
  front.decay = p.barrier_decay;
  front.value = [=](const Vector& x) { return x[i3] - x[i4] - delta; };
  front.gradient = [=](const Vector& x) {
    Vector g = Vector::Zero(x.size());
    g[i3] = 1.0;
    g[i4] = -1.0;
    return g;
  };
  BarrierSpec rear;
  rear.label = "rear_gap";
  rear.decay = p.barrier_decay;
  rear.value = [=](const Vector& x) { return x[i4] - x[i5] - delta; };
  rear.gradient = [=](const Vector& x) {
    Vector g = Vector::Zero(x.size());
    g[i4] = 1.0;
    g[i5] = -1.0;
    return g;
  };
  spec.barriers = {std::move(front), std::move(rear)};
  return spec;
}

}  // namespace

CarFollowingEnv::CarFollowingEnv(CarFollowingParams params)
    : Environment(make_spec(params)), params_(std::move(params)) {}

std::array<double, 5> CarFollowingEnv::accelerations(const Vector& x) const {
  validate_state(x);
  const auto p = [&](int car) { return x[position_index(car)]; };
  const auto v = [&](int car) { return x[velocity_index(car)]; };
  const double vs = params_.preferred_speed;
  const double kv = params_.speed_gain;
  const double kb = params_.brake_gain;
  const double t = x[kTimeIndex];

  std::array<double, 5> a{};
  a[0] = kv * (vs - params_.lead_amplitude * std::sin(t) - v(1));
  for (int car : {2, 3}) {
    const double gap = p(car - 1) - p(car);
    a[car - 1] = kv * (vs - v(car));
    if (std::abs(gap) < params_.brake_distance) a[car - 1] -= kb * gap;
  }
  const double gap35 = p(3) - p(5);
  a[4] = kv * (vs - v(5));
  if (std::abs(gap35) < params_.rear_brake_distance) a[4] -= kb * gap35;
  return a;
}

Vector CarFollowingEnv::initial_state() const {
  Vector x = Vector::Zero(kStateDim);
  for (int car = 1; car <= 5; ++car) {
    x[position_index(car)] = (5 - car) * params_.initial_spacing;
    x[velocity_index(car)] = params_.preferred_speed;
  }
  x[kTimeIndex] = 0.0;
  return x;
}

Vector CarFollowingEnv::integrate(const Vector& x, const Vector& u,
                                  double residual) const {
  const auto a = accelerations(x);
  const double dt = params_.dt;
  Vector next = x;
  for (int car : {1, 2, 3, 5}) {
    next[position_index(car)] = x[position_index(car)] + x[velocity_index(car)] * dt;
    next[velocity_index(car)] =
        x[velocity_index(car)] + (1.0 + residual) * a[car - 1] * dt;
  }
  next[position_index(4)] = x[position_index(4)] + u[0] * dt;
  next[velocity_index(4)] = u[0];
  next[kTimeIndex] = x[kTimeIndex] + dt;
  return next;
}

Vector CarFollowingEnv::drift(const Vector& x) const {
  return integrate(x, Vector::Zero(1), 0.0);
}

Matrix CarFollowingEnv::input_matrix(const Vector& x) const {
  validate_state(x);
  Matrix g = Matrix::Zero(kStateDim, 1);
  g(position_index(4), 0) = params_.dt;
  g(velocity_index(4), 0) = 1.0;
  return g;
}

Vector CarFollowingEnv::step(const Vector& x, const Vector& u) const {
  validate_control(u);
  return integrate(x, u, params_.residual);
}

StepFeedback CarFollowingEnv::feedback(const Vector& x, const Vector& u,
                                       const Vector& next) const {
  validate_state(x);
  validate_state(next);
  StepFeedback fb;
  fb.next_state = next;
  const double gap = front_gap(next);
  const double du = u[0] - params_.preferred_speed;
  fb.reward = -du * du;
  if (gap >= params_.band_lower && gap <= params_.band_upper) {
    fb.reward += params_.band_bonus;
  }
  fb.cost = std::abs(gap - params_.desired_gap);
  fb.barrier_values = barrier_values(next);
  fb.violation = fb.barrier_values.minCoeff() < 0.0;
  return fb;
}

void CarFollowingEnv::features(const Vector& x, Vector& out,
                               Matrix* jacobian) const {
  constexpr double kGapScale = 0.1;
  constexpr double kSpeedScale = 0.2;
  const double ref = params_.desired_gap;
  out.resize(11);
  for (int k = 0; k < 4; ++k) {
    out[k] = kGapScale * (x[position_index(k + 1)] - x[position_index(k + 2)] - ref);
  }
  for (int car = 1; car <= 5; ++car) {
    out[3 + car] = kSpeedScale * x[velocity_index(car)];
  }
  const double t = x[kTimeIndex];
  out[9] = std::sin(t);
  out[10] = std::cos(t);
  if (jacobian != nullptr) {
    jacobian->setZero(11, kStateDim);
    for (int k = 0; k < 4; ++k) {
      (*jacobian)(k, position_index(k + 1)) = kGapScale;
      (*jacobian)(k, position_index(k + 2)) = -kGapScale;
    }
    for (int car = 1; car <= 5; ++car) {
      (*jacobian)(3 + car, velocity_index(car)) = kSpeedScale;
    }
    (*jacobian)(9, kTimeIndex) = std::cos(t);
    (*jacobian)(10, kTimeIndex) = -std::sin(t);
  }
}

Vector CarFollowingEnv::gp_input(const Vector& x) const {
  Vector z(5);
  for (int car = 1; car <= 5; ++car) z[car - 1] = x[velocity_index(car)];
  return z;
}

}  // namespace blac::envs
