#include "blac/gp/gp_residual.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <spdlog/spdlog.h>

namespace blac::gp {

namespace {

constexpr double kJitter = 1e-9;

void validate_kernel(const KernelParams& k, int input_dim) {
  if (!(k.signal_variance > 0.0)) {
    throw std::invalid_argument("GP: signal variance must be > 0");
  }
  if (k.noise_variance < 0.0) {
    throw std::invalid_argument("GP: noise variance must be >= 0");
  }
  if (k.length_scales.size() != 1 && k.length_scales.size() != input_dim) {
    throw std::invalid_argument("GP: length scales must have 1 or input_dim entries");
  }
  if ((k.length_scales.array() <= 0.0).any()) {
    throw std::invalid_argument("GP: length scales must be > 0");
  }
}

}  // namespace

GpResidualModel::GpResidualModel(int input_dim, int output_dim, GpConfig config)
    : GpResidualModel(input_dim, output_dim,
                      std::vector<KernelParams>(std::max(output_dim, 0), config.kernel),
                      config.capacity) {}

GpResidualModel::GpResidualModel(int input_dim, int output_dim,
                                 std::vector<KernelParams> kernels,
                                 std::size_t capacity)
    : input_dim_(input_dim),
      output_dim_(output_dim),
      kernels_(std::move(kernels)),
      capacity_(capacity) {
  if (input_dim <= 0 || output_dim <= 0) {
    throw std::invalid_argument("GP: dimensions must be positive");
  }
  if (capacity == 0) throw std::invalid_argument("GP: capacity must be > 0");
  if (kernels_.size() != static_cast<std::size_t>(output_dim)) {
    throw std::invalid_argument("GP: need one kernel per output dimension");
  }
  for (KernelParams& k : kernels_) {
    validate_kernel(k, input_dim);
    if (k.length_scales.size() == 1) {
      k.length_scales = Vector::Constant(input_dim, k.length_scales[0]);
    }
  }
  factors_.resize(output_dim);
  weights_.resize(output_dim);
}

double GpResidualModel::kernel_value(int output, const Vector& a,
                                     const Vector& b) const {
  const KernelParams& k = kernels_[output];
  const double r2 = ((a - b).array() / k.length_scales.array()).square().sum();
  return k.signal_variance * std::exp(-0.5 * r2);
}

void GpResidualModel::check_input(const Vector& x) const {
  if (x.size() != input_dim_) {
    throw std::invalid_argument("GP: input has dimension " +
                                std::to_string(x.size()) + ", expected " +
                                std::to_string(input_dim_));
  }
  if (!x.allFinite()) throw std::invalid_argument("GP: non-finite input");
}

void GpResidualModel::fit(const Vector& input, const Vector& target) {
  fit(std::vector<Vector>{input}, std::vector<Vector>{target});
}

void GpResidualModel::fit(const std::vector<Vector>& inputs,
                          const std::vector<Vector>& targets) {
  if (frozen_) {
    spdlog::debug("GP is frozen; ignoring {} new pairs", inputs.size());
    return;
  }
  if (inputs.size() != targets.size()) {
    throw std::invalid_argument("GP: inputs and targets differ in count");
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    check_input(inputs[i]);
    if (targets[i].size() != output_dim_) {
      throw std::invalid_argument("GP: target has dimension " +
                                  std::to_string(targets[i].size()) +
                                  ", expected " + std::to_string(output_dim_));
    }
    inputs_.push_back(inputs[i]);
    targets_.push_back(targets[i]);
    if (inputs_.size() > capacity_) {
      inputs_.pop_front();
      targets_.pop_front();
    }
  }
  refactor();
}

void GpResidualModel::refactor() {
  const auto n = static_cast<Eigen::Index>(inputs_.size());
  for (int out = 0; out < output_dim_; ++out) {
    Matrix k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) {
        k(i, j) = k(j, i) = kernel_value(out, inputs_[i], inputs_[j]);
      }
    }
    k.diagonal().array() += kernels_[out].noise_variance;
    Vector y(n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = targets_[i][out];

    factors_[out].compute(k);
    double jitter = kJitter;
    while (factors_[out].info() != Eigen::Success) {
      if (jitter > 1e-3) {
        throw std::runtime_error("GP: kernel matrix is not positive definite");
      }
      Matrix kj = k;
      kj.diagonal().array() += jitter;
      factors_[out].compute(kj);
      jitter *= 10.0;
    }
    weights_[out] = factors_[out].solve(y);
  }
}

GpPrediction GpResidualModel::predict(const Vector& x) const {
  check_input(x);
  GpPrediction p;
  p.mean = Vector::Zero(output_dim_);
  p.variance = Vector::Zero(output_dim_);
  const auto n = static_cast<Eigen::Index>(inputs_.size());
  for (int out = 0; out < output_dim_; ++out) {
    const double prior = kernels_[out].signal_variance;
    if (n == 0) {
      p.variance[out] = prior;
      continue;
    }
    Vector ks(n);
    for (Eigen::Index i = 0; i < n; ++i) ks[i] = kernel_value(out, x, inputs_[i]);
    p.mean[out] = ks.dot(weights_[out]);
    const Vector v = factors_[out].matrixL().solve(ks);
    p.variance[out] = std::max(prior - v.squaredNorm(), 0.0);
  }
  return p;
}

Vector GpResidualModel::predict_mean(const Vector& x) const {
  check_input(x);
  Vector mean = Vector::Zero(output_dim_);
  const auto n = static_cast<Eigen::Index>(inputs_.size());
  for (int out = 0; out < output_dim_ && n > 0; ++out) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      m += kernel_value(out, x, inputs_[i]) * weights_[out][i];
    }
    mean[out] = m;
  }
  return mean;
}

void GpResidualModel::freeze() { frozen_ = true; }

}  // namespace blac::gp
