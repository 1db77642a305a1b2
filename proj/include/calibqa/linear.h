#pragma once

#include <span>
#include <vector>

#include "calibqa/matrix.h"

namespace calibqa {

struct LogisticParams {
  double l2 = 1.0;
  int max_iters = 100;
  double tol = 1e-6;

  void validate() const;
  bool operator==(const LogisticParams&) const = default;
};

struct LogisticModel {
  Vector weights;
  double bias = 0.0;
  int iterations = 0;
  bool converged = false;

  double predict_proba(std::span<const double> row) const;
  std::vector<double> predict_proba(const Matrix& x) const;
};

// Objective minimized by fit_logistic:
//   J(w, b) = sum_i logloss(y_i, sigmoid(w.x_i + b)) + l2/2 * |w|^2
// The bias is not penalized.
double logistic_objective(const Matrix& x, std::span<const int> y, double l2,
                          const Vector& weights, double bias);

// Gradient of logistic_objective; the last entry is d/db.
Vector logistic_gradient(const Matrix& x, std::span<const int> y, double l2,
                         const Vector& weights, double bias);

// Damped Newton iterations with backtracking; stops once the gradient's
// infinity norm is <= tol or after max_iters.
LogisticModel fit_logistic(const Matrix& x, std::span<const int> y,
                           const LogisticParams& params);

}  // namespace calibqa
