#include <algorithm>
#include <map>

#include <Eigen/Eigenvalues>

#include "calibqa/error.h"
#include "calibqa/metrics.h"

namespace calibqa {

LdaProjection lda_fit(const Matrix& x, std::span<const int> labels) {
  const Eigen::Index n = x.rows();
  const Eigen::Index m = x.cols();
  if (static_cast<std::size_t>(n) != labels.size()) {
    throw InputError("lda: rows and labels differ in length");
  }
  if (n < 3) throw InputError("lda needs at least 3 points");
  if (m < 2) throw InputError("lda needs at least 2 input dimensions");
  if (!x.allFinite()) throw InputError("lda input is not finite");

  std::map<int, std::vector<Eigen::Index>> members;
  for (Eigen::Index i = 0; i < n; ++i) members[labels[static_cast<std::size_t>(i)]].push_back(i);
  if (members.size() < 2) throw MetricUndefinedError("lda needs at least two classes");
  if (static_cast<Eigen::Index>(members.size()) > m + 1) {
    throw InputError("lda: more classes than input dimensions + 1");
  }

  const Vector mean = x.colwise().mean().transpose();
  Eigen::MatrixXd within = Eigen::MatrixXd::Zero(m, m);
  Eigen::MatrixXd between = Eigen::MatrixXd::Zero(m, m);
  for (const auto& [label, rows] : members) {
    Vector class_mean = Vector::Zero(m);
    for (const Eigen::Index i : rows) class_mean += x.row(i).transpose();
    class_mean /= static_cast<double>(rows.size());
    for (const Eigen::Index i : rows) {
      const Vector centered = x.row(i).transpose() - class_mean;
      within.noalias() += centered * centered.transpose();
    }
    const Vector shift = class_mean - mean;
    between.noalias() += static_cast<double>(rows.size()) * shift * shift.transpose();
  }

  const double eps = std::max(1e-6 * within.trace() / static_cast<double>(m), 1e-12);
  Eigen::MatrixXd regularized = within;
  regularized.diagonal().array() += eps;

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(between, regularized);
  if (solver.info() != Eigen::Success) throw InputError("lda eigen decomposition failed");

  LdaProjection out;
  out.mean = mean;
  out.directions.resize(m, 2);
  for (int c = 0; c < 2; ++c) {
    // Eigenvalues come back ascending.
    const Eigen::Index col = m - 1 - c;
    Vector v = solver.eigenvectors().col(col);
    v.normalize();
    const double scale = v.cwiseAbs().maxCoeff();
    for (Eigen::Index j = 0; j < m; ++j) {
      if (std::abs(v[j]) > 1e-12 * scale) {
        if (v[j] < 0) v = -v;
        break;
      }
    }
    out.directions.col(c) = v;
    out.eigenvalues.push_back(solver.eigenvalues()[col]);
  }
  out.coordinates = (x.rowwise() - mean.transpose()) * out.directions;
  return out;
}

Matrix lda_project(const Matrix& x, std::span<const int> labels) {
  return lda_fit(x, labels).coordinates;
}

}  // namespace calibqa
