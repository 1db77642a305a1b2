#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "calibqa/matrix.h"

namespace calibqa {

struct KnnModel {
  Matrix points;
  std::vector<int> labels;
  int k = 5;

  // Indices of the k nearest training rows by Euclidean distance, nearest
  // first; equal distances resolve to the lower row index.
  std::vector<std::size_t> neighbors(std::span<const double> query) const;

  // Fraction of positive labels among the k nearest rows.
  double predict_proba(std::span<const double> query) const;
  std::vector<double> predict_proba(const Matrix& x) const;
};

KnnModel fit_knn(const Matrix& x, std::span<const int> y, int k);

}  // namespace calibqa
