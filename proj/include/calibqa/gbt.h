#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "calibqa/matrix.h"

namespace calibqa {

// Defaults follow the usual XGBoost defaults.
struct GbtHyperparams {
  int n_estimators = 100;
  double learning_rate = 0.3;
  double colsample_by_tree = 1.0;
  double colsample_by_level = 1.0;
  double colsample_by_node = 1.0;
  int max_depth = 6;
  double l2_leaf_reg = 1.0;
  double min_child_weight = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const GbtHyperparams&) const = default;
};

struct TreeNode {
  // feature < 0 marks a leaf.
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> row) const;
  bool operator==(const RegressionTree&) const = default;
};

struct GbtEnsemble {
  double base_margin = 0.0;
  std::vector<RegressionTree> trees;

  // Raw log-odds using at most `max_rounds` trees.
  double margin(std::span<const double> row, std::size_t max_rounds = SIZE_MAX) const;
  double predict_proba(std::span<const double> row, std::size_t max_rounds = SIZE_MAX) const;
  std::vector<double> predict_proba(const Matrix& x, std::size_t max_rounds = SIZE_MAX) const;

  bool operator==(const GbtEnsemble&) const = default;
};

// Optional per-round diagnostics.
struct GbtTrace {
  // Mean training log loss after each round; entry 0 is the bias-only model.
  std::vector<double> train_loss;
};

// Gradient boosting under logistic loss with exact greedy split search.
// Each round fits a tree to g = p - y, h = p(1 - p); the gain of a split is
//   0.5 * [GL^2/(HL+l) + GR^2/(HR+l) - (GL+GR)^2/(HL+HR+l)]
// and a leaf holds -lr * G/(H+l). Column subsampling nests tree -> level ->
// node and draws from an RNG stream seeded by (seed, tree index).
GbtEnsemble fit_gbt(const Matrix& x, std::span<const int> y, const GbtHyperparams& hp,
                    GbtTrace* trace = nullptr);

double sigmoid(double z);

// Mean log loss of probabilities against 0/1 labels.
double log_loss(std::span<const double> probabilities, std::span<const int> y);

// Shared precondition check for every learner: nonempty finite X, 0/1 labels
// of matching length, both classes present.
void check_training_data(const Matrix& x, std::span<const int> y);

}  // namespace calibqa
