#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "calibqa/matrix.h"

namespace calibqa {

struct RiskCoveragePoint {
  double coverage = 0.0;
  // Error rate among the covered examples.
  double risk = 0.0;

  bool operator==(const RiskCoveragePoint&) const = default;
};

// Fraction of examples where the predicted correctness equals the actual one.
double calibration_accuracy(std::span<const int> predicted_correct,
                            std::span<const int> actual_correct);

// ROC AUC as the Mann-Whitney statistic: (concordant + ties/2) / (n+ * n-).
// Throws MetricUndefinedError when only one class is present.
double auroc(std::span<const double> scores, std::span<const int> labels);

// Examples sorted by descending score (ties keep input order); point k covers
// the first k examples.
std::vector<RiskCoveragePoint> risk_coverage_curve(std::span<const double> scores,
                                                   std::span<const int> correct);

// Area under the risk-coverage step curve (mean risk over the N prefixes).
double risk_coverage_area(std::span<const RiskCoveragePoint> curve);

// Largest prefix fraction k/N whose accuracy is >= threshold; 0 if none.
double coverage_at_accuracy(std::span<const double> scores, std::span<const int> correct,
                            double threshold = 0.8);

// BLEU-4 on whitespace tokens with clipped n-gram precisions, a brevity
// penalty, and zero clipped counts replaced by 1e-9.
double sentence_bleu(std::string_view reference, std::string_view hypothesis);

struct LdaProjection {
  // m x 2, columns are unit-norm discriminant directions.
  Matrix directions;
  Vector mean;
  std::vector<double> eigenvalues;
  // N x 2 coordinates of the fitted data.
  Matrix coordinates;
};

// Top-2 generalized eigenvectors of S_b v = lambda (S_w + eps I) v with
// eps = 1e-6 * trace(S_w) / m. Each direction's first nonzero component is
// made positive.
LdaProjection lda_fit(const Matrix& x, std::span<const int> labels);
Matrix lda_project(const Matrix& x, std::span<const int> labels);

// Mean silhouette coefficient under Euclidean distance.
double silhouette_score(const Matrix& points, std::span<const int> labels);

}  // namespace calibqa
