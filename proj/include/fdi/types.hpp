#pragma once

#include <Eigen/Dense>

namespace fdi {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

}  // namespace fdi
