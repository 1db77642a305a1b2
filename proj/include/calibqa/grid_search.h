#pragma once

#include <vector>

#include "calibqa/features.h"
#include "calibqa/gbt.h"

namespace calibqa {

// Exhaustive grid over the boosted-tree knobs that get tuned on dev data. The
// three colsample fields share one value per grid point.
struct GbtGrid {
  std::vector<double> colsample;
  std::vector<double> learning_rates;
  std::vector<int> n_estimators;
  // Everything not swept (depth, regularization, seed) comes from here.
  GbtHyperparams base;

  // colsample {0.1..0.5}, lr {0.01, 0.1, 0.2, 0.5}, trees {5, 25, 50, 100}.
  static GbtGrid defaults();

  std::size_t size() const;
  // Points in sweep order: colsample, then learning rate, then trees.
  std::vector<GbtHyperparams> points() const;
};

struct GridPointScore {
  GbtHyperparams params;
  double dev_accuracy = 0.0;
};

struct GridSearchResult {
  GbtHyperparams best;
  double best_dev_accuracy = 0.0;
  std::vector<GridPointScore> scores;
};

// Picks the point with the highest dev calibration accuracy; ties go to fewer
// trees, then the smaller learning rate, then the smaller colsample. Points
// that differ only in n_estimators share one training run, since a prefix of
// a boosted ensemble equals the shorter ensemble.
GridSearchResult grid_search(const FeatureMatrix& train, const FeatureMatrix& dev,
                             const GbtGrid& grid, double decision_threshold = 0.5,
                             int jobs = 1);

}  // namespace calibqa
