#include "calibqa/knn.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "calibqa/error.h"
#include "test_support.h"

namespace calibqa {
namespace {

std::vector<std::size_t> brute_force(const Matrix& points, std::span<const double> q, int k) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(points.rows()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<double> dist(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    double d = 0;
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
      const double diff = points(static_cast<Eigen::Index>(i), j) - q[static_cast<std::size_t>(j)];
      d += diff * diff;
    }
    dist[i] = d;
  }
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

TEST(KnnTest, MatchesBruteForceSort) {
  std::mt19937_64 rng(21);
  for (int dataset = 0; dataset < 5; ++dataset) {
    Matrix x = testing::random_matrix(rng, 60, 3);
    // Rounding creates exact distance ties.
    x = (x * 2).array().round() / 2;
    std::vector<int> y(60);
    for (int i = 0; i < 60; ++i) y[static_cast<std::size_t>(i)] = x(i, 0) > 0;
    y[0] = 1;
    y[1] = 0;
    const KnnModel model = fit_knn(x, y, 7);
    for (int q = 0; q < 20; ++q) {
      Matrix query = testing::random_matrix(rng, 1, 3);
      query = query.array().round();
      const std::span<const double> row(query.data(), 3);
      const auto expected = brute_force(x, row, 7);
      EXPECT_EQ(model.neighbors(row), expected);
      double pos = 0;
      for (const auto i : expected) pos += y[i];
      EXPECT_DOUBLE_EQ(model.predict_proba(row), pos / 7.0);
    }
  }
}

TEST(KnnTest, KBounds) {
  Matrix x(3, 1);
  x << 0, 1, 2;
  const std::vector<int> y = {0, 1, 1};
  EXPECT_THROW(fit_knn(x, y, 0), InputError);
  EXPECT_THROW(fit_knn(x, y, 4), InputError);
  const KnnModel all = fit_knn(x, y, 3);
  const double q = 10.0;
  EXPECT_DOUBLE_EQ(all.predict_proba(std::span<const double>(&q, 1)), 2.0 / 3.0);
}

}  // namespace
}  // namespace calibqa
