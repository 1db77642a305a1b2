#pragma once

#include <Eigen/Dense>

namespace calibqa {

// Row-major so that one example's features are contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace calibqa
