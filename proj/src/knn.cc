#include "calibqa/knn.h"

#include <algorithm>
#include <numeric>

#include "calibqa/error.h"
#include "calibqa/gbt.h"

namespace calibqa {

KnnModel fit_knn(const Matrix& x, std::span<const int> y, int k) {
  check_training_data(x, y);
  if (k < 1) throw InputError("knn k must be >= 1");
  if (static_cast<Eigen::Index>(k) > x.rows()) {
    throw InputError("knn k exceeds the number of training rows");
  }
  return KnnModel{x, std::vector<int>(y.begin(), y.end()), k};
}

std::vector<std::size_t> KnnModel::neighbors(std::span<const double> query) const {
  const auto n = static_cast<std::size_t>(points.rows());
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
      const double diff = points(static_cast<Eigen::Index>(i), j) - query[j];
      s += diff * diff;
    }
    dist[i] = {s, i};
  }
  const auto kk = static_cast<std::size_t>(k);
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
  std::vector<std::size_t> out(kk);
  for (std::size_t i = 0; i < kk; ++i) out[i] = dist[i].second;
  return out;
}

double KnnModel::predict_proba(std::span<const double> query) const {
  int positives = 0;
  for (const std::size_t i : neighbors(query)) positives += labels[i];
  return static_cast<double>(positives) / k;
}

std::vector<double> KnnModel::predict_proba(const Matrix& x) const {
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    out[i] = predict_proba(std::span<const double>(x.row(i).data(), x.cols()));
  }
  return out;
}

}  // namespace calibqa
