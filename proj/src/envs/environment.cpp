#include "blac/envs/environment.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace blac::envs {

bool ControlBox::contains(const Vector& u, double tol) const {
  if (u.size() != lower.size()) return false;
  return ((u.array() >= lower.array() - tol) &&
          (u.array() <= upper.array() + tol))
      .all();
}

Vector ControlBox::clip(const Vector& u) const {
  return u.cwiseMax(lower).cwiseMin(upper);
}

Environment::Environment(EnvSpec spec) : spec_(std::move(spec)) {
  if (spec_.state_dim <= 0 || spec_.control_dim <= 0) {
    throw std::invalid_argument("EnvSpec: dimensions must be positive");
  }
  if (!(spec_.dt > 0.0)) throw std::invalid_argument("EnvSpec: dt must be > 0");
  if (spec_.bounds.lower.size() != spec_.control_dim ||
      spec_.bounds.upper.size() != spec_.control_dim ||
      (spec_.bounds.lower.array() > spec_.bounds.upper.array()).any()) {
    throw std::invalid_argument("EnvSpec: control box is empty or misshaped");
  }
  for (const BarrierSpec& b : spec_.barriers) {
    if (b.decay < 0.0 || b.decay > 1.0) {
      throw std::invalid_argument("BarrierSpec '" + b.label +
                                  "': decay rate must lie in [0, 1]");
    }
  }
}

Vector Environment::nominal_step(const Vector& x, const Vector& u) const {
  return drift(x) + input_matrix(x) * u;
}

Vector Environment::barrier_values(const Vector& x) const {
  Vector h(spec_.barriers.size());
  for (std::size_t i = 0; i < spec_.barriers.size(); ++i) {
    h[static_cast<Eigen::Index>(i)] = spec_.barriers[i].value(x);
  }
  return h;
}

double Environment::min_barrier(const Vector& x) const {
  double m = std::numeric_limits<double>::infinity();
  for (const BarrierSpec& b : spec_.barriers) m = std::min(m, b.value(x));
  return m;
}

void Environment::validate_state(const Vector& x) const {
  if (x.size() != spec_.state_dim) {
    throw std::invalid_argument(spec_.id + ": state has dimension " +
                                std::to_string(x.size()) + ", expected " +
                                std::to_string(spec_.state_dim));
  }
  if (!x.allFinite()) throw std::invalid_argument(spec_.id + ": non-finite state");
}

void Environment::validate_control(const Vector& u) const {
  if (u.size() != spec_.control_dim) {
    throw std::invalid_argument(spec_.id + ": control has dimension " +
                                std::to_string(u.size()) + ", expected " +
                                std::to_string(spec_.control_dim));
  }
  if (!u.allFinite()) throw std::invalid_argument(spec_.id + ": non-finite control");
  if (!spec_.bounds.contains(u)) {
    throw std::invalid_argument(spec_.id + ": control outside the control box");
  }
}

}  // namespace blac::envs
