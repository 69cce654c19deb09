#include "blac/diffcore/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace blac::diff {

void Adam::step(std::span<Parameter* const> params) {
  if (m_.empty()) {
    for (const Parameter* p : params) {
      m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (m_.size() != params.size()) {
    throw std::invalid_argument("Adam: parameter list changed between steps");
  }
  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = options_.learning_rate;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    if (p.grad.rows() != m_[i].rows() || p.grad.cols() != m_[i].cols()) {
      throw std::invalid_argument("Adam: gradient shape mismatch");
    }
    m_[i] = b1 * m_[i] + (1.0 - b1) * p.grad;
    v_[i] = b2 * v_[i] + (1.0 - b2) * p.grad.cwiseAbs2();
    p.value.array() -= lr * (m_[i].array() / c1) /
                       ((v_[i].array() / c2).sqrt() + options_.epsilon);
  }
}

}  // namespace blac::diff
