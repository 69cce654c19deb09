#include "blac/safety/backup_qp.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

namespace blac::safety {

namespace {

constexpr double kPsdTolerance = 1e-10;
constexpr double kFeasibilityTolerance = 1e-10;
constexpr double kDualTolerance = 1e-10;

}  // namespace

BackupProblem::BackupProblem(Matrix q, Vector slack_penalty, double kappa,
                             Vector clf_direction, Vector u_nominal,
                             Matrix constraint_rows, Vector constraint_bounds)
    : q_(std::move(q)),
      slack_penalty_(std::move(slack_penalty)),
      kappa_(kappa),
      clf_direction_(std::move(clf_direction)),
      u_nominal_(std::move(u_nominal)),
      rows_(std::move(constraint_rows)),
      bounds_(std::move(constraint_bounds)) {
  const Eigen::Index m = q_.rows();
  if (m == 0 || q_.cols() != m) {
    throw std::invalid_argument("BackupProblem: Q must be square and nonempty");
  }
  if (!q_.isApprox(q_.transpose(), 1e-12) && (q_ - q_.transpose()).norm() > 1e-12) {
    throw std::invalid_argument("BackupProblem: Q must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(q_);
  if (eig.eigenvalues().minCoeff() < -kPsdTolerance) {
    throw std::invalid_argument("BackupProblem: Q must be positive semidefinite");
  }
  if (kappa_ < 0.0) throw std::invalid_argument("BackupProblem: kappa must be >= 0");
  if (clf_direction_.size() != m || u_nominal_.size() != m) {
    throw std::invalid_argument("BackupProblem: control vectors have wrong size");
  }
  const Eigen::Index k = rows_.rows();
  if ((k > 0 && rows_.cols() != m) || bounds_.size() != k ||
      slack_penalty_.size() != k) {
    throw std::invalid_argument("BackupProblem: constraint shapes disagree");
  }
  if ((slack_penalty_.array() <= 0.0).any()) {
    throw std::invalid_argument("BackupProblem: slack penalties must be > 0");
  }
  if (!rows_.allFinite() || !bounds_.allFinite() || !clf_direction_.allFinite()) {
    throw std::invalid_argument("BackupProblem: non-finite data");
  }
}

double BackupProblem::objective(const Vector& u_modi, const Vector& slack) const {
  return 0.5 * u_modi.dot(q_ * u_modi) +
         (slack_penalty_.array() * slack.array().square()).sum() -
         kappa_ * clf_direction_.dot(u_modi);
}

double BackupProblem::max_violation(const Vector& u_modi, const Vector& slack) const {
  if (rows_.rows() == 0) return -std::numeric_limits<double>::infinity();
  return (rows_ * u_modi - slack - bounds_).maxCoeff();
}

BackupSolution solve_backup_qp(const BackupProblem& problem) {
  const int m = problem.control_dim();
  const int k = problem.num_constraints();
  const int n = m + k;
  if (k > 20) {
    throw std::invalid_argument("solve_backup_qp: too many constraints for enumeration");
  }

  // Stacked variable z = (u_modi, eps); objective 1/2 z' H z + g' z.
  Matrix h = Matrix::Zero(n, n);
  h.topLeftCorner(m, m) = problem.q();
  for (int i = 0; i < k; ++i) h(m + i, m + i) = 2.0 * problem.slack_penalty()[i];
  Vector g = Vector::Zero(n);
  g.head(m) = -problem.kappa() * problem.clf_direction();
  Matrix c = Matrix::Zero(k, n);
  if (k > 0) c.leftCols(m) = problem.constraint_rows();
  for (int i = 0; i < k; ++i) c(i, m + i) = -1.0;
  const Vector& b = problem.constraint_bounds();

  BackupSolution best;
  double best_obj = std::numeric_limits<double>::infinity();
  BackupSolution fallback;
  double fallback_violation = std::numeric_limits<double>::infinity();

  for (unsigned mask = 0; mask < (1u << k); ++mask) {
    std::vector<int> active;
    for (int i = 0; i < k; ++i) {
      if (mask & (1u << i)) active.push_back(i);
    }
    const int a = static_cast<int>(active.size());
    Matrix kkt = Matrix::Zero(n + a, n + a);
    Vector rhs(n + a);
    kkt.topLeftCorner(n, n) = h;
    rhs.head(n) = -g;
    for (int j = 0; j < a; ++j) {
      kkt.block(0, n + j, n, 1) = c.row(active[j]).transpose();
      kkt.block(n + j, 0, 1, n) = c.row(active[j]);
      rhs[n + j] = b[active[j]];
    }
    const Eigen::FullPivLU<Matrix> lu(kkt);
    if (!lu.isInvertible()) continue;
    const Vector sol = lu.solve(rhs);
    const Vector z = sol.head(n);
    const Vector mu = sol.tail(a);

    const double violation = k > 0 ? (c * z - b).maxCoeff() : -1.0;
    BackupSolution cand;
    cand.u_modi = z.head(m);
    cand.slack = z.tail(k);
    cand.u_actual = problem.u_nominal() - cand.u_modi;
    cand.objective = problem.objective(cand.u_modi, cand.slack);
    cand.active_set = active;

    const bool primal_ok = violation <= kFeasibilityTolerance;
    const bool dual_ok = a == 0 || mu.minCoeff() >= -kDualTolerance;
    if (primal_ok && dual_ok) {
      if (cand.objective < best_obj) {
        best_obj = cand.objective;
        best = cand;
      }
    } else if (violation < fallback_violation) {
      fallback_violation = violation;
      fallback = cand;
    }
  }
  if (!std::isfinite(best_obj)) {
    throw BackupSolveError("solve_backup_qp: no active set satisfied the KKT conditions",
                           fallback);
  }
  return best;
}

BackupProblem build_backup_problem(const BackupParams& params,
                                   const DynamicsModel& model,
                                   const StateFunction* lyapunov,
                                   const Vector& x, const Vector& u_nominal) {
  const envs::Environment& env = model.env();
  const int m = env.control_dim();
  const auto& barriers = env.spec().barriers;
  const int k = static_cast<int>(barriers.size());

  Vector q_diag = params.q_diagonal;
  if (q_diag.size() == 1 && m > 1) q_diag = Vector::Constant(m, q_diag[0]);
  if (q_diag.size() != m) {
    throw std::invalid_argument("build_backup_problem: Q diagonal has wrong size");
  }

  const Matrix gx = env.input_matrix(x);
  const Vector predicted = model.predict_next(x, u_nominal);
  Vector sigma = Vector::Zero(env.state_dim());
  if (params.sigma_margin > 0.0) sigma = model.residual_std(x);
  const auto modeled = env.residual_dims();
  double sigma_norm = 0.0;
  for (int d : modeled) sigma_norm += sigma[d] * sigma[d];
  sigma_norm = std::sqrt(sigma_norm);

  Matrix rows(k, m);
  Vector bounds(k);
  for (int i = 0; i < k; ++i) {
    const envs::BarrierSpec& bar = barriers[i];
    const Vector grad = bar.gradient(predicted);
    // u_actual = u_nominal - u_modi, so d h / d u_modi = -(g' grad h).
    rows.row(i) = (gx.transpose() * grad).transpose();
    double grad_norm = 0.0;
    for (int d : modeled) grad_norm += grad[d] * grad[d];
    const double margin = params.sigma_margin * std::sqrt(grad_norm) * sigma_norm;
    bounds[i] = bar.value(predicted) - (1.0 - bar.decay) * bar.value(x) - margin;
  }

  Vector clf_direction = Vector::Zero(m);
  if (lyapunov != nullptr && params.kappa > 0.0) {
    clf_direction = gx.transpose() * lyapunov->gradient(x);
  }
  return BackupProblem(q_diag.asDiagonal(), Vector::Constant(k, params.slack_penalty),
                       params.kappa, clf_direction, u_nominal, rows, bounds);
}

BackupSolution backup_solve(const BackupParams& params,
                            const DynamicsModel& model,
                            const StateFunction* lyapunov, const Vector& x,
                            const Vector& u_nominal) {
  BackupSolution sol =
      solve_backup_qp(build_backup_problem(params, model, lyapunov, x, u_nominal));
  sol.u_actual = model.env().spec().bounds.clip(sol.u_actual);
  return sol;
}

}  // namespace blac::safety
