#include "blac/agent/lagrangian.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace blac::agent {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kBlac:
      return "blac";
    case Variant::kBac:
      return "bac";
    case Variant::kSac:
      return "sac";
  }
  return "blac";
}

Variant variant_from_string(const std::string& name) {
  if (name == "blac") return Variant::kBlac;
  if (name == "bac") return Variant::kBac;
  if (name == "sac") return Variant::kSac;
  throw std::invalid_argument("unknown variant '" + name + "' (expected blac, bac or sac)");
}

LagrangianState::LagrangianState(int num_barriers, const LagrangianOptions& options)
    : lambda(num_barriers, options.initial_multiplier),
      rho_lambda(num_barriers, options.initial_penalty),
      zeta(options.initial_multiplier),
      rho_zeta(options.initial_penalty),
      growth(options.penalty_growth),
      rho_max(options.penalty_max),
      dual_lr(options.dual_lr) {
  if (options.initial_multiplier < 0.0) {
    throw std::invalid_argument("LagrangianState: multipliers must start >= 0");
  }
  if (!(options.initial_penalty > 0.0) || options.initial_penalty > options.penalty_max) {
    throw std::invalid_argument("LagrangianState: need 0 < rho <= rho_max");
  }
  if (!(options.penalty_growth >= 1.0)) {
    throw std::invalid_argument("LagrangianState: penalty growth must be >= 1");
  }
  if (!(options.dual_lr > 0.0)) {
    throw std::invalid_argument("LagrangianState: dual learning rate must be > 0");
  }
}

namespace {

void check_residual(double r, const char* what) {
  if (!std::isfinite(r) || r < 0.0) {
    throw std::invalid_argument(std::string("dual_update: ") + what +
                                " residual mean must be finite and >= 0");
  }
}

}  // namespace

void dual_update(LagrangianState& s, const std::vector<double>& cbf_means,
                 std::optional<double> clf_mean) {
  if (cbf_means.size() != s.lambda.size()) {
    throw std::invalid_argument("dual_update: expected one residual mean per barrier");
  }
  for (double r : cbf_means) check_residual(r, "barrier");
  if (clf_mean) check_residual(*clf_mean, "Lyapunov");

  for (std::size_t i = 0; i < cbf_means.size(); ++i) {
    s.lambda[i] += s.dual_lr * cbf_means[i];
    s.rho_lambda[i] = std::min(s.growth * s.rho_lambda[i], s.rho_max);
  }
  if (clf_mean) {
    s.zeta += s.dual_lr * *clf_mean;
    s.rho_zeta = std::min(s.growth * s.rho_zeta, s.rho_max);
  }
}

}  // namespace blac::agent
