#include "blac/agent/networks.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace blac::agent {

namespace {

using diff::Activation;
using diff::Var;

std::vector<int> widths(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

Matrix softplus(const Matrix& z) {
  return (z.array().max(0.0) + (-z.array().abs()).exp().log1p()).matrix();
}

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

}  // namespace

Matrix feature_batch(const envs::Environment& env, const Matrix& states) {
  Matrix out(env.feature_dim(), states.cols());
  Vector f;
  for (Eigen::Index j = 0; j < states.cols(); ++j) {
    env.features(states.col(j), f, nullptr);
    out.col(j) = f;
  }
  return out;
}

PolicyNet::PolicyNet(int feature_dim, const std::vector<int>& hidden,
                     envs::ControlBox box, std::mt19937_64& rng)
    : net_(diff::Mlp::random(widths(feature_dim, hidden, 2 * box.dim()),
                             Activation::kRelu, Activation::kIdentity, rng)),
      box_(std::move(box)) {}

PolicyNet::PolicyNet(diff::Mlp net, envs::ControlBox box)
    : net_(std::move(net)), box_(std::move(box)) {
  if (net_.output_dim() != 2 * box_.dim()) {
    throw std::invalid_argument("PolicyNet: network output must be 2 x control dim");
  }
}

PolicyNet::Sample PolicyNet::sample(const Matrix& features, const Matrix& xi) const {
  const int m = control_dim();
  const Eigen::Index b = features.cols();
  if (xi.rows() != m || xi.cols() != b) {
    throw std::invalid_argument("PolicyNet::sample: noise has wrong shape");
  }
  const Matrix out = net_.apply_batch(features);
  const Matrix log_std = out.bottomRows(m).cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  const Matrix pre = out.topRows(m) + (log_std.array().exp() * xi.array()).matrix();
  Sample s;
  s.squashed = pre.array().tanh().matrix();
  s.control = (s.squashed.array().colwise() * box_.half_width().array()).matrix();
  s.control.colwise() += box_.center();
  const Matrix log_jac =
      2.0 * (std::log(2.0) - pre.array() - softplus(-2.0 * pre).array());
  const Matrix elem = (-0.5 * xi.array().square() - kHalfLog2Pi - log_std.array() -
                       log_jac.array())
                          .matrix();
  s.log_prob = elem.colwise().sum().array() -
               box_.half_width().array().log().sum();
  return s;
}

Matrix PolicyNet::deterministic(const Matrix& features) const {
  const Matrix out = net_.apply_batch(features);
  Matrix u = (out.topRows(control_dim()).array().tanh().colwise() *
              box_.half_width().array())
                 .matrix();
  u.colwise() += box_.center();
  return u;
}

PolicyNet::TapeSample PolicyNet::sample(diff::Tape& tape, Var features,
                                        const Matrix& xi) {
  const int m = control_dim();
  const Eigen::Index b = features.cols();
  if (xi.rows() != m || xi.cols() != b) {
    throw std::invalid_argument("PolicyNet::sample: noise has wrong shape");
  }
  Var out = net_.apply(tape, features);
  Var mu = slice_rows(out, 0, m);
  Var log_std = clamp(slice_rows(out, m, m), kLogStdMin, kLogStdMax);
  Var pre = mu + exp(log_std) * tape.constant(xi);
  Var squashed = tanh(pre);
  Var control = tape.constant(box_.center().replicate(1, b)) +
                tape.constant(box_.half_width().replicate(1, b)) * squashed;
  // log(1 - tanh(z)^2) = 2 (log 2 - z - softplus(-2 z))
  Var log_jac = scale(shift(-pre - softplus(scale(pre, -2.0)), std::log(2.0)), 2.0);
  Var gauss = tape.constant((-0.5 * xi.array().square() - kHalfLog2Pi).matrix());
  Var log_prob = shift(sum_rows(gauss - log_std - log_jac),
                       -box_.half_width().array().log().sum());
  return {control, squashed, log_prob};
}

Matrix PolicyNet::normalize(const Matrix& controls) const {
  Matrix a = controls;
  a.colwise() -= box_.center();
  return (a.array().colwise() / box_.half_width().array()).matrix();
}

CriticPair::CriticPair(int feature_dim, int control_dim,
                       const std::vector<int>& hidden, std::mt19937_64& rng) {
  for (int i = 0; i < 2; ++i) {
    online_.push_back(diff::Mlp::random(widths(feature_dim + control_dim, hidden, 1),
                                        Activation::kRelu, Activation::kIdentity, rng));
  }
  target_ = online_;
}

RowVector CriticPair::min_target(const Matrix& inputs) const {
  return target_[0].apply_batch(inputs).cwiseMin(target_[1].apply_batch(inputs));
}

RowVector CriticPair::min_online(const Matrix& inputs) const {
  return online_[0].apply_batch(inputs).cwiseMin(online_[1].apply_batch(inputs));
}

std::vector<diff::Parameter*> CriticPair::parameters() {
  auto p = online_[0].parameters();
  auto q = online_[1].parameters();
  p.insert(p.end(), q.begin(), q.end());
  return p;
}

LyapunovNet::LyapunovNet(int feature_dim, const std::vector<int>& hidden,
                         std::mt19937_64& rng)
    : online_(diff::Mlp::random(widths(feature_dim, hidden, 1), Activation::kRelu,
                                Activation::kRelu, rng)) {
  // A rectified output that starts negative on every state never receives a
  // gradient; start in the active region instead.
  online_.layer(online_.num_layers() - 1).bias.value.setConstant(kOutputBias);
  target_ = online_;
}

double LyapunovNet::value(const envs::Environment& env, const Vector& x) const {
  Vector f;
  env.features(x, f, nullptr);
  return online_.apply(f)[0];
}

Vector LyapunovNet::gradient(const envs::Environment& env, const Vector& x) const {
  Vector f;
  Matrix jac;
  env.features(x, f, &jac);
  return jac.transpose() * online_.input_gradient(f);
}

safety::StateFunction LyapunovNet::as_state_function(const envs::Environment& env) const {
  return {[this, &env](const Vector& x) { return value(env, x); },
          [this, &env](const Vector& x) { return gradient(env, x); }};
}

EntropyTemp::EntropyTemp(double initial_alpha, double target_entropy)
    : target(target_entropy), log_alpha(Matrix::Constant(1, 1, std::log(initial_alpha))) {
  if (!(initial_alpha > 0.0)) throw std::invalid_argument("EntropyTemp: alpha must be > 0");
}

double EntropyTemp::alpha() const { return std::exp(log_alpha.value(0, 0)); }

void polyak_update(const diff::Mlp& online, diff::Mlp& target, double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) {
    throw std::invalid_argument("polyak_update: tau must lie in (0, 1]");
  }
  const auto src = online.parameters();
  const auto dst = target.parameters();
  if (src.size() != dst.size()) {
    throw std::invalid_argument("polyak_update: networks have different depth");
  }
  for (std::size_t k = 0; k < src.size(); ++k) {
    if (src[k]->value.rows() != dst[k]->value.rows() ||
        src[k]->value.cols() != dst[k]->value.cols()) {
      throw std::invalid_argument("polyak_update: parameter shapes differ");
    }
  }
  for (std::size_t k = 0; k < src.size(); ++k) {
    if (tau == 1.0) {
      dst[k]->value = src[k]->value;
    } else {
      dst[k]->value = (1.0 - tau) * dst[k]->value + tau * src[k]->value;
    }
  }
}

}  // namespace blac::agent
