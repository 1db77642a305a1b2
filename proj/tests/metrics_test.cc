#include "calibqa/metrics.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "calibqa/error.h"
#include "test_support.h"

namespace calibqa {
namespace {

struct Instance {
  std::vector<double> scores;
  std::vector<int> labels;
};

// Scores drawn from a small grid so ties are common.
Instance random_instance(std::mt19937_64& rng, std::size_t n) {
  std::uniform_int_distribution<int> level(0, 19);
  std::bernoulli_distribution coin(0.4);
  Instance inst;
  for (std::size_t i = 0; i < n; ++i) {
    inst.scores.push_back(level(rng) / 20.0);
    inst.labels.push_back(coin(rng) ? 1 : 0);
  }
  inst.labels[0] = 1;
  inst.labels[1] = 0;
  return inst;
}

double auroc_pairs(const Instance& inst) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < inst.scores.size(); ++i) {
    if (inst.labels[i] != 1) continue;
    for (std::size_t j = 0; j < inst.scores.size(); ++j) {
      if (inst.labels[j] != 0) continue;
      pairs += 1.0;
      if (inst.scores[i] > inst.scores[j]) wins += 1.0;
      if (inst.scores[i] == inst.scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

// Descending by score, ties in input order.
std::vector<int> sorted_correct(const Instance& inst) {
  std::vector<std::size_t> idx(inst.scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return inst.scores[a] > inst.scores[b]; });
  std::vector<int> out;
  for (std::size_t i : idx) out.push_back(inst.labels[i]);
  return out;
}

TEST(AurocTest, MatchesPairwiseOracle) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    const Instance inst = random_instance(rng, 200);
    EXPECT_NEAR(auroc(inst.scores, inst.labels), auroc_pairs(inst), 1e-9);
  }
}

TEST(AurocTest, Examples) {
  EXPECT_EQ(auroc(std::vector<double>{0.9, 0.8, 0.1}, std::vector<int>{1, 1, 0}), 1.0);
  EXPECT_EQ(auroc(std::vector<double>{0.3, 0.3, 0.3, 0.3}, std::vector<int>{1, 0, 1, 0}), 0.5);
  EXPECT_THROW(auroc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), MetricUndefinedError);
}

TEST(AurocTest, InvariantUnderMonotoneMapsAndFlips) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < 10; ++t) {
    Instance inst = random_instance(rng, 100);
    for (double& s : inst.scores) s = n(rng);  // continuous: no ties
    const double base = auroc(inst.scores, inst.labels);
    std::vector<double> mapped;
    std::vector<double> affine;
    std::vector<double> negated;
    for (double s : inst.scores) {
      mapped.push_back(std::exp(s));
      affine.push_back(3.0 * s - 7.0);
      negated.push_back(-s);
    }
    EXPECT_NEAR(auroc(mapped, inst.labels), base, 1e-12);
    EXPECT_NEAR(auroc(affine, inst.labels), base, 1e-12);
    EXPECT_NEAR(auroc(negated, inst.labels), 1.0 - base, 1e-12);
  }
}

TEST(RiskCoverageTest, MatchesPrefixRecount) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const Instance inst = random_instance(rng, 100);
    const auto curve = risk_coverage_curve(inst.scores, inst.labels);
    const auto order = sorted_correct(inst);
    ASSERT_EQ(curve.size(), order.size());
    for (std::size_t k = 1; k <= order.size(); ++k) {
      const int wrong = static_cast<int>(k) - std::accumulate(order.begin(), order.begin() + static_cast<long>(k), 0);
      EXPECT_EQ(curve[k - 1].coverage, static_cast<double>(k) / static_cast<double>(order.size()));
      EXPECT_EQ(curve[k - 1].risk, static_cast<double>(wrong) / static_cast<double>(k));
    }
    const double acc = std::accumulate(inst.labels.begin(), inst.labels.end(), 0.0) / 100.0;
    EXPECT_NEAR(curve.back().risk, 1.0 - acc, 1e-15);
  }
}

TEST(RiskCoverageTest, Examples) {
  const auto curve = risk_coverage_curve(std::vector<double>{0.9, 0.1}, std::vector<int>{1, 0});
  ASSERT_EQ(curve.size(), 2u);
  EXPECT_EQ(curve[0], (RiskCoveragePoint{0.5, 0.0}));
  EXPECT_EQ(curve[1], (RiskCoveragePoint{1.0, 0.5}));
  for (const auto& p : risk_coverage_curve(std::vector<double>{3, 1, 2}, std::vector<int>{1, 1, 1})) {
    EXPECT_EQ(p.risk, 0.0);
  }
  EXPECT_DOUBLE_EQ(risk_coverage_area(curve), 0.25);
}

TEST(CoverageAtAccuracyTest, MatchesExhaustiveScan) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    const Instance inst = random_instance(rng, 200);
    const auto order = sorted_correct(inst);
    for (const double threshold : {0.5, 0.6, 0.8}) {
      double best = 0.0;
      int hits = 0;
      for (std::size_t k = 1; k <= order.size(); ++k) {
        hits += order[k - 1];
        if (static_cast<double>(hits) >= threshold * static_cast<double>(k)) {
          best = static_cast<double>(k) / static_cast<double>(order.size());
        }
      }
      EXPECT_EQ(coverage_at_accuracy(inst.scores, inst.labels, threshold), best);
    }
  }
}

TEST(CoverageAtAccuracyTest, Examples) {
  const std::vector<double> s = {5, 4, 3, 2, 1};
  EXPECT_EQ(coverage_at_accuracy(s, std::vector<int>{1, 1, 1, 1, 1}), 1.0);
  EXPECT_EQ(coverage_at_accuracy(s, std::vector<int>{1, 1, 1, 1, 0}), 1.0);
  EXPECT_EQ(coverage_at_accuracy(s, std::vector<int>{0, 0, 0, 0, 0}), 0.0);
}

TEST(CoverageAtAccuracyTest, NonincreasingInThreshold) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    const Instance inst = random_instance(rng, 150);
    double prev = 1.0;
    for (double th = 0.0; th <= 1.0; th += 0.05) {
      const double c = coverage_at_accuracy(inst.scores, inst.labels, th);
      EXPECT_LE(c, prev);
      prev = c;
    }
  }
}

TEST(CalibrationAccuracyTest, MatchesLoopOracle) {
  std::mt19937_64 rng(6);
  std::bernoulli_distribution coin(0.5);
  for (int t = 0; t < 20; ++t) {
    std::vector<int> a(100);
    std::vector<int> b(100);
    int same = 0;
    for (int i = 0; i < 100; ++i) {
      a[static_cast<std::size_t>(i)] = coin(rng);
      b[static_cast<std::size_t>(i)] = coin(rng);
      same += a[static_cast<std::size_t>(i)] == b[static_cast<std::size_t>(i)];
    }
    EXPECT_EQ(calibration_accuracy(a, b), same / 100.0);
  }
  EXPECT_EQ(calibration_accuracy(std::vector<int>{1, 1, 0}, std::vector<int>{1, 1, 0}), 1.0);
  EXPECT_THROW(calibration_accuracy(std::vector<int>{}, std::vector<int>{}), InputError);
}

TEST(CalibrationAccuracyTest, AlwaysWrongPredictorScoresOneMinusAccuracy) {
  // 255 correct answers out of 1000 -> 74.5% calibration accuracy.
  std::vector<int> actual(1000, 0);
  std::fill(actual.begin(), actual.begin() + 255, 1);
  EXPECT_DOUBLE_EQ(calibration_accuracy(std::vector<int>(1000, 0), actual), 0.745);
}

TEST(BleuTest, HandComputedPrecisions) {
  // p1 = 5/6, p2 = 3/5, p3 = 2/4, p4 = 1/3, equal lengths.
  const double expected = std::pow(5.0 / 6 * 3.0 / 5 * 2.0 / 4 * 1.0 / 3, 0.25);
  EXPECT_NEAR(sentence_bleu("the cat sat on the mat", "the cat sat on a mat"), expected, 1e-12);
  EXPECT_NEAR(expected, 0.5373, 1e-4);
}

TEST(BleuTest, IdentityAndDisjoint) {
  EXPECT_DOUBLE_EQ(sentence_bleu("a b c d e f g h i j", "a b c d e f g h i j"), 1.0);
  EXPECT_DOUBLE_EQ(sentence_bleu("w x y z", "w x y z"), 1.0);
  EXPECT_LE(sentence_bleu("a b c d e", "v w x y z"), 1e-8);
  EXPECT_EQ(sentence_bleu("a b c", ""), 0.0);
}

TEST(BleuTest, BrevityPenalty) {
  // Hypothesis is a 4-token prefix of a 8-token reference: precisions are 1.
  EXPECT_NEAR(sentence_bleu("a b c d e f g h", "a b c d"), std::exp(1.0 - 8.0 / 4.0), 1e-12);
}

TEST(LdaTest, SeparatesWellSeparatedClusters) {
  std::mt19937_64 rng(7);
  Matrix x = testing::random_matrix(rng, 200, 10);
  std::vector<int> labels(200);
  for (int i = 0; i < 200; ++i) {
    labels[static_cast<std::size_t>(i)] = i % 2;
    if (i % 2) x.row(i).array() += 3.0;
  }
  const Matrix p = lda_project(x, labels);
  ASSERT_EQ(p.rows(), 200);
  ASSERT_EQ(p.cols(), 2);
  double m0 = 0;
  double m1 = 0;
  for (int i = 0; i < 200; ++i) (i % 2 ? m1 : m0) += p(i, 0) / 100.0;
  double var = 0;
  for (int i = 0; i < 200; ++i) {
    const double d = p(i, 0) - (i % 2 ? m1 : m0);
    var += d * d / 198.0;
  }
  EXPECT_GT(std::abs(m1 - m0), 5.0 * std::sqrt(var));
}

TEST(LdaTest, IdentityScatterGivesRotation) {
  // Each class is a plus-shaped set around its center, so S_w is a multiple
  // of the identity.
  const std::vector<std::pair<double, double>> centers = {{0, 0}, {4, 1}, {-1, 6}};
  const std::vector<std::pair<double, double>> offsets = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  Matrix x(12, 2);
  std::vector<int> labels;
  int row = 0;
  for (int c = 0; c < 3; ++c) {
    for (const auto& [dx, dy] : offsets) {
      x(row, 0) = centers[static_cast<std::size_t>(c)].first + dx;
      x(row, 1) = centers[static_cast<std::size_t>(c)].second + dy;
      labels.push_back(c);
      ++row;
    }
  }
  const Matrix p = lda_project(x, labels);
  for (int i = 0; i < 12; ++i) {
    for (int j = 0; j < 12; ++j) {
      EXPECT_NEAR((p.row(i) - p.row(j)).norm(), (x.row(i) - x.row(j)).norm(), 1e-6);
    }
  }
}

TEST(LdaTest, StackedDataKeepsDirections) {
  std::mt19937_64 rng(8);
  Matrix x = testing::random_matrix(rng, 60, 5);
  std::vector<int> labels(60);
  for (int i = 0; i < 60; ++i) {
    labels[static_cast<std::size_t>(i)] = i % 3;
    x(i, i % 3) += 2.0;
  }
  Matrix twice(120, 5);
  twice << x, x;
  std::vector<int> labels2 = labels;
  labels2.insert(labels2.end(), labels.begin(), labels.end());
  const LdaProjection a = lda_fit(x, labels);
  const LdaProjection b = lda_fit(twice, labels2);
  EXPECT_LE((a.directions - b.directions).cwiseAbs().maxCoeff(), 1e-6);
  for (int c = 0; c < 2; ++c) {
    const auto col = a.directions.col(c);
    EXPECT_NEAR(col.norm(), 1.0, 1e-9);
    for (Eigen::Index k = 0; k < col.size(); ++k) {
      if (std::abs(col[k]) > 1e-12) {
        EXPECT_GT(col[k], 0.0);
        break;
      }
    }
  }
}

TEST(LdaTest, Preconditions) {
  std::mt19937_64 rng(9);
  const Matrix x = testing::random_matrix(rng, 10, 3);
  EXPECT_THROW(lda_project(x, std::vector<int>(10, 1)), MetricUndefinedError);
  EXPECT_THROW(lda_project(x.topRows(2), std::vector<int>{0, 1}), InputError);
  EXPECT_THROW(lda_project(x.leftCols(1), std::vector<int>{0, 1, 0, 1, 0, 1, 0, 1, 0, 1}),
               InputError);
  std::vector<int> many = {0, 1, 2, 3, 4, 0, 1, 2, 3, 4};
  EXPECT_THROW(lda_project(x, many), InputError);
}

TEST(SilhouetteTest, MatchesBruteForce) {
  std::mt19937_64 rng(10);
  const Matrix x = testing::random_matrix(rng, 40, 2);
  std::vector<int> labels(40);
  for (int i = 0; i < 40; ++i) labels[static_cast<std::size_t>(i)] = i % 3;
  double total = 0.0;
  for (int i = 0; i < 40; ++i) {
    std::vector<double> sum(3, 0.0);
    std::vector<int> count(3, 0);
    for (int j = 0; j < 40; ++j) {
      if (i == j) continue;
      sum[static_cast<std::size_t>(labels[static_cast<std::size_t>(j)])] += (x.row(i) - x.row(j)).norm();
      count[static_cast<std::size_t>(labels[static_cast<std::size_t>(j)])] += 1;
    }
    const int own = labels[static_cast<std::size_t>(i)];
    const double a = sum[static_cast<std::size_t>(own)] / count[static_cast<std::size_t>(own)];
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < 3; ++c) {
      if (c != own) b = std::min(b, sum[static_cast<std::size_t>(c)] / count[static_cast<std::size_t>(c)]);
    }
    total += (b - a) / std::max(a, b);
  }
  EXPECT_NEAR(silhouette_score(x, labels), total / 40.0, 1e-12);
}

}  // namespace
}  // namespace calibqa
