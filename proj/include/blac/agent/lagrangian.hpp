#pragma once

#include <optional>
#include <string>
#include <vector>

namespace blac::agent {

/// BLAC uses both constraint families, BAC drops the Lyapunov decrease
/// constraint and SAC drops both.
enum class Variant { kBlac, kBac, kSac };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& name);
inline bool uses_cbf(Variant v) { return v != Variant::kSac; }
inline bool uses_clf(Variant v) { return v == Variant::kBlac; }

struct LagrangianOptions {
  double initial_multiplier = 0.0;
  double initial_penalty = 1.0;
  double penalty_growth = 1.0005;  // C_rho
  double penalty_max = 1e3;
  double dual_lr = 1e-3;           // eta_3
};

/// Multipliers lambda_i (one per barrier) and zeta with their quadratic
/// penalty coefficients.
struct LagrangianState {
  LagrangianState() = default;
  LagrangianState(int num_barriers, const LagrangianOptions& options);

  std::vector<double> lambda;
  std::vector<double> rho_lambda;
  double zeta = 0.0;
  double rho_zeta = 1.0;
  double growth = 1.0005;
  double rho_max = 1e3;
  double dual_lr = 1e-3;
};

/// lambda_i += eta_3 * cbf_means[i], zeta += eta_3 * clf_mean (when given),
/// then every active penalty grows by C_rho up to rho_max. Throws
/// std::invalid_argument on a negative or non-finite residual mean or a
/// count mismatch.
void dual_update(LagrangianState& state, const std::vector<double>& cbf_means,
                 std::optional<double> clf_mean);

}  // namespace blac::agent
