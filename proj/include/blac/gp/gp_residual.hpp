#pragma once

#include <deque>
#include <vector>

#include <Eigen/Cholesky>

#include "blac/diffcore/types.hpp"

namespace blac::gp {

/// Squared-exponential kernel hyperparameters for one output dimension.
struct KernelParams {
  double signal_variance = 1.0;
  /// One length scale per input dimension; a single entry is broadcast.
  Vector length_scales = Vector::Ones(1);
  double noise_variance = 1e-4;
};

struct GpConfig {
  KernelParams kernel;
  std::size_t capacity = 200;
};

struct GpPrediction {
  Vector mean;
  Vector variance;
};

/// Independent GP regressors, one per output dimension, sharing one dataset
/// of (input, residual) pairs. The dataset is a FIFO of bounded capacity.
class GpResidualModel {
 public:
  GpResidualModel(int input_dim, int output_dim, GpConfig config = {});
  /// Per-output kernel hyperparameters.
  GpResidualModel(int input_dim, int output_dim,
                  std::vector<KernelParams> kernels, std::size_t capacity);

  /// Appends the pairs, evicting the oldest beyond capacity, and refreshes
  /// the factorizations. Ignored once frozen.
  void fit(const std::vector<Vector>& inputs, const std::vector<Vector>& targets);
  void fit(const Vector& input, const Vector& target);

  GpPrediction predict(const Vector& x) const;
  Vector predict_mean(const Vector& x) const;

  void freeze();
  bool frozen() const { return frozen_; }

  std::size_t size() const { return inputs_.size(); }
  std::size_t capacity() const { return capacity_; }
  int input_dim() const { return input_dim_; }
  int output_dim() const { return output_dim_; }
  const KernelParams& kernel(int output) const { return kernels_.at(output); }
  const std::deque<Vector>& inputs() const { return inputs_; }
  const std::deque<Vector>& targets() const { return targets_; }

  double kernel_value(int output, const Vector& a, const Vector& b) const;

 private:
  void refactor();
  void check_input(const Vector& x) const;

  int input_dim_;
  int output_dim_;
  std::vector<KernelParams> kernels_;
  std::size_t capacity_;
  bool frozen_ = false;

  std::deque<Vector> inputs_;
  std::deque<Vector> targets_;
  // Per output: Cholesky factor of K + noise I and the weights (K+noise I)^-1 y.
  std::vector<Eigen::LLT<Matrix>> factors_;
  std::vector<Vector> weights_;
};

}  // namespace blac::gp
