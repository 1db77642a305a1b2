#include "calibqa/linear.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "calibqa/error.h"
#include "calibqa/gbt.h"
#include "test_support.h"

namespace calibqa {
namespace {

struct Problem {
  Matrix x;
  std::vector<int> y;
};

Problem random_problem(std::uint64_t seed, int n = 120, int m = 4) {
  std::mt19937_64 rng(seed);
  Problem p{testing::random_matrix(rng, n, m), std::vector<int>(static_cast<std::size_t>(n))};
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    p.y[static_cast<std::size_t>(i)] = u(rng) < sigmoid(1.5 * p.x(i, 0) - p.x(i, 1) + 0.3);
  }
  return p;
}

// Central differences of the objective, independent of logistic_gradient.
Vector numeric_gradient(const Problem& p, double l2, const Vector& w, double b) {
  const double h = 1e-6;
  Vector g(w.size() + 1);
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    Vector up = w;
    Vector down = w;
    up[j] += h;
    down[j] -= h;
    g[j] = (logistic_objective(p.x, p.y, l2, up, b) - logistic_objective(p.x, p.y, l2, down, b)) /
           (2 * h);
  }
  g[w.size()] = (logistic_objective(p.x, p.y, l2, w, b + h) -
                 logistic_objective(p.x, p.y, l2, w, b - h)) /
                (2 * h);
  return g;
}

TEST(LogisticTest, AnalyticGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Problem p = random_problem(seed);
    Vector w(4);
    w << 0.3, -0.2, 0.1, 0.5;
    const Vector analytic = logistic_gradient(p.x, p.y, 0.7, w, -0.4);
    const Vector numeric = numeric_gradient(p, 0.7, w, -0.4);
    EXPECT_LE((analytic - numeric).cwiseAbs().maxCoeff(), 1e-4);
  }
}

TEST(LogisticTest, ConvergesToStationaryPoint) {
  for (std::uint64_t seed = 10; seed < 15; ++seed) {
    const Problem p = random_problem(seed);
    const LogisticModel model = fit_logistic(p.x, p.y, {});
    EXPECT_TRUE(model.converged);
    EXPECT_LE(numeric_gradient(p, 1.0, model.weights, model.bias).cwiseAbs().maxCoeff(), 1e-4);
  }
}

TEST(LogisticTest, ObjectiveBeatsPerturbations) {
  const Problem p = random_problem(3);
  const LogisticModel model = fit_logistic(p.x, p.y, {});
  const double best = logistic_objective(p.x, p.y, 1.0, model.weights, model.bias);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 0.05);
  for (int t = 0; t < 20; ++t) {
    Vector w = model.weights;
    for (Eigen::Index j = 0; j < w.size(); ++j) w[j] += n(rng);
    EXPECT_GT(logistic_objective(p.x, p.y, 1.0, w, model.bias + n(rng)), best);
  }
}

TEST(LogisticTest, BiasIsNotPenalized) {
  // Constant features give no signal; the bias alone fits the base rate.
  Matrix x = Matrix::Zero(10, 2);
  std::vector<int> y = {1, 1, 1, 0, 0, 0, 0, 0, 0, 0};
  const LogisticModel model = fit_logistic(x, y, {.l2 = 100.0});
  EXPECT_NEAR(sigmoid(model.bias), 0.3, 1e-6);
}

TEST(LogisticTest, RejectsBadInput) {
  Matrix x(2, 1);
  x << 1, 2;
  EXPECT_THROW(fit_logistic(x, std::vector<int>{1, 1}, {}), InputError);
  EXPECT_THROW(fit_logistic(x, std::vector<int>{1, 0}, {.l2 = -1.0}), InputError);
}

}  // namespace
}  // namespace calibqa
