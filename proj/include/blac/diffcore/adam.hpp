#pragma once

#include <span>
#include <vector>

#include "blac/diffcore/tape.hpp"

namespace blac::diff {

struct AdamOptions {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam over a fixed, ordered list of parameters. Moment buffers are matched
/// to parameters by position, so pass the same list on every step.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  /// Applies one descent step using each parameter's accumulated gradient.
  void step(std::span<Parameter* const> params);

  const AdamOptions& options() const { return options_; }
  long steps_taken() const { return t_; }

 private:
  AdamOptions options_;
  long t_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

}  // namespace blac::diff
