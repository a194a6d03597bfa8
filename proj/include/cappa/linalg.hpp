#pragma once

#include <Eigen/Core>

namespace cappa {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

}  // namespace cappa
