#include "calibqa/linear.h"

#include <cmath>

#include "calibqa/error.h"
#include "calibqa/gbt.h"

namespace calibqa {

namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

}  // namespace

void LogisticParams::validate() const {
  if (!(l2 >= 0.0)) throw InputError("logistic l2 must be >= 0");
  if (max_iters < 1) throw InputError("logistic max_iters must be >= 1");
  if (!(tol > 0.0)) throw InputError("logistic tol must be > 0");
}

double LogisticModel::predict_proba(std::span<const double> row) const {
  double z = bias;
  for (Eigen::Index j = 0; j < weights.size(); ++j) z += weights[j] * row[j];
  return sigmoid(z);
}

std::vector<double> LogisticModel::predict_proba(const Matrix& x) const {
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    out[i] = predict_proba(std::span<const double>(x.row(i).data(), x.cols()));
  }
  return out;
}

double logistic_objective(const Matrix& x, std::span<const int> y, double l2,
                          const Vector& weights, double bias) {
  const Vector z = (x * weights).array() + bias;
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    // -log sigmoid(z) = softplus(-z), -log(1 - sigmoid(z)) = softplus(z)
    total += y[i] ? softplus(-z[i]) : softplus(z[i]);
  }
  return total + 0.5 * l2 * weights.squaredNorm();
}

Vector logistic_gradient(const Matrix& x, std::span<const int> y, double l2,
                         const Vector& weights, double bias) {
  const Eigen::Index d = x.cols();
  const Vector z = (x * weights).array() + bias;
  Vector residual(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) residual[i] = sigmoid(z[i]) - y[i];
  Vector grad(d + 1);
  grad.head(d) = x.transpose() * residual + l2 * weights;
  grad[d] = residual.sum();
  return grad;
}

LogisticModel fit_logistic(const Matrix& x, std::span<const int> y,
                           const LogisticParams& params) {
  params.validate();
  check_training_data(x, y);
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();

  LogisticModel model;
  model.weights = Vector::Zero(d);
  double positives = 0;
  for (const int label : y) positives += label;
  model.bias = std::log(positives / (static_cast<double>(n) - positives));

  double objective = logistic_objective(x, y, params.l2, model.weights, model.bias);
  for (int iter = 0; iter < params.max_iters; ++iter) {
    const Vector grad = logistic_gradient(x, y, params.l2, model.weights, model.bias);
    model.iterations = iter;
    if (grad.lpNorm<Eigen::Infinity>() <= params.tol) {
      model.converged = true;
      return model;
    }

    // Hessian over [w; b].
    const Vector z = (x * model.weights).array() + model.bias;
    Vector curvature(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = sigmoid(z[i]);
      curvature[i] = p * (1.0 - p);
    }
    Eigen::MatrixXd hessian(d + 1, d + 1);
    hessian.topLeftCorner(d, d) = x.transpose() * curvature.asDiagonal() * x;
    hessian.topLeftCorner(d, d).diagonal().array() += params.l2;
    const Vector cross = x.transpose() * curvature;
    hessian.block(0, d, d, 1) = cross;
    hessian.block(d, 0, 1, d) = cross.transpose();
    hessian(d, d) = curvature.sum();
    // Keeps the system solvable when l2 == 0 and the data are degenerate.
    hessian.diagonal().array() += 1e-12;

    const Vector step = hessian.ldlt().solve(-grad);
    double t = 1.0;
    bool improved = false;
    for (int k = 0; k < 50; ++k, t *= 0.5) {
      const Vector w = model.weights + t * step.head(d);
      const double b = model.bias + t * step[d];
      const double candidate = logistic_objective(x, y, params.l2, w, b);
      if (candidate <= objective + 1e-4 * t * grad.dot(step)) {
        model.weights = w;
        model.bias = b;
        objective = candidate;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  const Vector grad = logistic_gradient(x, y, params.l2, model.weights, model.bias);
  model.iterations = params.max_iters;
  model.converged = grad.lpNorm<Eigen::Infinity>() <= params.tol;
  return model;
}

}  // namespace calibqa
