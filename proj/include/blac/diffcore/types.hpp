#pragma once

#include <Eigen/Dense>

namespace blac {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

}  // namespace blac
