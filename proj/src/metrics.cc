#include "calibqa/metrics.h"

#include <algorithm>
#include <numeric>

#include "calibqa/error.h"

namespace calibqa {

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* metric) {
  if (a != b) throw InputError(std::string(metric) + ": inputs differ in length");
  if (a == 0) throw InputError(std::string(metric) + ": empty input");
}

// Indices ordered by descending score; equal scores keep input order.
std::vector<std::size_t> descending_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

double calibration_accuracy(std::span<const int> predicted_correct,
                            std::span<const int> actual_correct) {
  check_lengths(predicted_correct.size(), actual_correct.size(), "calibration_accuracy");
  std::size_t agree = 0;
  for (std::size_t i = 0; i < predicted_correct.size(); ++i) {
    agree += (predicted_correct[i] != 0) == (actual_correct[i] != 0);
  }
  return static_cast<double>(agree) / static_cast<double>(predicted_correct.size());
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  check_lengths(scores.size(), labels.size(), "auroc");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double concordant = 0.0;
  double negatives_below = 0.0;
  double positives = 0.0;
  double negatives = 0.0;
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start;
    double pos = 0.0, neg = 0.0;
    while (end < order.size() && scores[order[end]] == scores[order[start]]) {
      (labels[order[end]] ? pos : neg) += 1.0;
      ++end;
    }
    concordant += pos * negatives_below + 0.5 * pos * neg;
    negatives_below += neg;
    positives += pos;
    negatives += neg;
    start = end;
  }
  if (positives == 0.0 || negatives == 0.0) {
    throw MetricUndefinedError("auroc is undefined when only one class is present");
  }
  return concordant / (positives * negatives);
}

std::vector<RiskCoveragePoint> risk_coverage_curve(std::span<const double> scores,
                                                   std::span<const int> correct) {
  check_lengths(scores.size(), correct.size(), "risk_coverage_curve");
  const std::vector<std::size_t> order = descending_order(scores);
  const double n = static_cast<double>(scores.size());
  std::vector<RiskCoveragePoint> curve;
  curve.reserve(order.size());
  std::size_t wrong = 0;
  for (std::size_t k = 1; k <= order.size(); ++k) {
    wrong += correct[order[k - 1]] ? 0 : 1;
    curve.push_back({static_cast<double>(k) / n,
                     static_cast<double>(wrong) / static_cast<double>(k)});
  }
  return curve;
}

double risk_coverage_area(std::span<const RiskCoveragePoint> curve) {
  if (curve.empty()) return 0.0;
  double area = 0.0;
  for (const auto& p : curve) area += p.risk;
  return area / static_cast<double>(curve.size());
}

double coverage_at_accuracy(std::span<const double> scores, std::span<const int> correct,
                            double threshold) {
  check_lengths(scores.size(), correct.size(), "coverage_at_accuracy");
  const std::vector<std::size_t> order = descending_order(scores);
  std::size_t best = 0;
  std::size_t right = 0;
  for (std::size_t k = 1; k <= order.size(); ++k) {
    right += correct[order[k - 1]] ? 1 : 0;
    if (static_cast<double>(right) / static_cast<double>(k) >= threshold) best = k;
  }
  return static_cast<double>(best) / static_cast<double>(order.size());
}

double silhouette_score(const Matrix& points, std::span<const int> labels) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (n != labels.size() || n < 2) throw InputError("silhouette_score: bad input sizes");
  std::vector<int> classes(labels.begin(), labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2) throw MetricUndefinedError("silhouette needs at least two clusters");

  std::vector<std::size_t> cluster_of(n);
  std::vector<double> cluster_size(classes.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    cluster_of[i] = static_cast<std::size_t>(
        std::lower_bound(classes.begin(), classes.end(), labels[i]) - classes.begin());
    cluster_size[cluster_of[i]] += 1.0;
  }
  double total = 0.0;
  std::vector<double> dist_sum(classes.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(dist_sum.begin(), dist_sum.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      dist_sum[cluster_of[j]] +=
          (points.row(static_cast<Eigen::Index>(i)) - points.row(static_cast<Eigen::Index>(j)))
              .norm();
    }
    const std::size_t own = cluster_of[i];
    if (cluster_size[own] <= 1.0) continue;
    const double a = dist_sum[own] / (cluster_size[own] - 1.0);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < classes.size(); ++c) {
      if (c != own) b = std::min(b, dist_sum[c] / cluster_size[c]);
    }
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(n);
}

}  // namespace calibqa
