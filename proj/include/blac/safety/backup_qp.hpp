#pragma once

#include <stdexcept>
#include <vector>

#include "blac/diffcore/types.hpp"
#include "blac/safety/constraints.hpp"

namespace blac::safety {

/// Tuning of the backup controller.
struct BackupParams {
  /// Diagonal of the control weight Q.
  Vector q_diagonal = Vector::Ones(1);
  /// Slack penalty k_eps, shared by all barriers.
  double slack_penalty = 100.0;
  /// Weight of the Lyapunov descent term.
  double kappa = 0.1;
  /// Multiplier on the GP standard deviation when tightening barriers.
  double sigma_margin = 1.0;
};

/// QP in (u_modi, eps):
///   min 1/2 u' Q u + sum_i k_i eps_i^2 - kappa c' u
///   s.t. a_i' u - eps_i <= b_i   for each barrier i.
class BackupProblem {
 public:
  /// Throws std::invalid_argument if Q is not symmetric PSD, a penalty is not
  /// positive, kappa is negative, or shapes disagree.
  BackupProblem(Matrix q, Vector slack_penalty, double kappa,
                Vector clf_direction, Vector u_nominal, Matrix constraint_rows,
                Vector constraint_bounds);

  int control_dim() const { return static_cast<int>(q_.rows()); }
  int num_constraints() const { return static_cast<int>(rows_.rows()); }

  const Matrix& q() const { return q_; }
  const Vector& slack_penalty() const { return slack_penalty_; }
  double kappa() const { return kappa_; }
  const Vector& clf_direction() const { return clf_direction_; }
  const Vector& u_nominal() const { return u_nominal_; }
  const Matrix& constraint_rows() const { return rows_; }
  const Vector& constraint_bounds() const { return bounds_; }

  double objective(const Vector& u_modi, const Vector& slack) const;
  /// Largest constraint violation max_i(a_i' u - eps_i - b_i), or -inf.
  double max_violation(const Vector& u_modi, const Vector& slack) const;

 private:
  Matrix q_;
  Vector slack_penalty_;
  double kappa_;
  Vector clf_direction_;
  Vector u_nominal_;
  Matrix rows_;
  Vector bounds_;
};

struct BackupSolution {
  Vector u_modi;
  /// u_nominal - u_modi, before any clipping by the caller.
  Vector u_actual;
  Vector slack;
  double objective = 0.0;
  /// Constraints treated as equalities at the solution.
  std::vector<int> active_set;
};

/// Thrown when no candidate satisfies the KKT conditions; carries the best
/// iterate found.
class BackupSolveError : public std::runtime_error {
 public:
  BackupSolveError(const std::string& what, BackupSolution iterate)
      : std::runtime_error(what), iterate_(std::move(iterate)) {}
  const BackupSolution& iterate() const { return iterate_; }

 private:
  BackupSolution iterate_;
};

/// Exact solve by enumerating active sets and solving each equality-
/// constrained KKT system. Intended for a handful of constraints.
BackupSolution solve_backup_qp(const BackupProblem& problem);

/// Builds the problem at state x: each barrier is linearized around
/// u_modi = 0 through the GP-corrected prediction and tightened by
/// sigma_margin * ||grad h|| * ||sigma||, where both norms run over the
/// GP-modeled state components.
BackupProblem build_backup_problem(const BackupParams& params,
                                   const DynamicsModel& model,
                                   const StateFunction* lyapunov,
                                   const Vector& x, const Vector& u_nominal);

/// Builds and solves; u_actual is clipped to the control box.
BackupSolution backup_solve(const BackupParams& params,
                            const DynamicsModel& model,
                            const StateFunction* lyapunov, const Vector& x,
                            const Vector& u_nominal);

}  // namespace blac::safety
