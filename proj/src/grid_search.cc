#include "calibqa/grid_search.h"

#include <algorithm>

#include "calibqa/calibrator.h"
#include "calibqa/error.h"
#include "calibqa/metrics.h"
#include "calibqa/parallel.h"

namespace calibqa {

namespace {

// True when `a` should be preferred over `b`.
bool better(const GridPointScore& a, const GridPointScore& b) {
  if (a.dev_accuracy != b.dev_accuracy) return a.dev_accuracy > b.dev_accuracy;
  if (a.params.n_estimators != b.params.n_estimators) {
    return a.params.n_estimators < b.params.n_estimators;
  }
  if (a.params.learning_rate != b.params.learning_rate) {
    return a.params.learning_rate < b.params.learning_rate;
  }
  return a.params.colsample_by_tree < b.params.colsample_by_tree;
}

}  // namespace

GbtGrid GbtGrid::defaults() {
  GbtGrid grid;
  grid.colsample = {0.1, 0.2, 0.3, 0.4, 0.5};
  grid.learning_rates = {0.01, 0.1, 0.2, 0.5};
  grid.n_estimators = {5, 25, 50, 100};
  return grid;
}

std::size_t GbtGrid::size() const {
  return colsample.size() * learning_rates.size() * n_estimators.size();
}

std::vector<GbtHyperparams> GbtGrid::points() const {
  std::vector<GbtHyperparams> out;
  out.reserve(size());
  for (const double c : colsample) {
    for (const double lr : learning_rates) {
      for (const int trees : n_estimators) {
        GbtHyperparams hp = base;
        hp.colsample_by_tree = hp.colsample_by_level = hp.colsample_by_node = c;
        hp.learning_rate = lr;
        hp.n_estimators = trees;
        out.push_back(hp);
      }
    }
  }
  return out;
}

GridSearchResult grid_search(const FeatureMatrix& train, const FeatureMatrix& dev,
                             const GbtGrid& grid, double decision_threshold, int jobs) {
  if (grid.size() == 0) throw InputError("hyperparameter grid is empty");
  if (train.fingerprint != dev.fingerprint) {
    throw CompatibilityError("train and dev features were built with different configs");
  }
  if (dev.labels.size() != dev.size() || dev.size() == 0) {
    throw InputError("grid search needs labelled dev features");
  }
  const int max_trees = *std::max_element(grid.n_estimators.begin(), grid.n_estimators.end());
  const std::size_t per_fit = grid.n_estimators.size();
  const std::size_t fits = grid.colsample.size() * grid.learning_rates.size();

  const std::vector<GbtHyperparams> points = grid.points();
  std::vector<GridPointScore> scores(points.size());
  parallel_for(fits, jobs, [&](std::size_t fit) {
    GbtHyperparams hp = points[fit * per_fit];
    hp.n_estimators = max_trees;
    const GbtEnsemble ensemble = fit_gbt(train.values, train.labels, hp);
    for (std::size_t j = 0; j < per_fit; ++j) {
      const GbtHyperparams& point = points[fit * per_fit + j];
      const auto proba =
          ensemble.predict_proba(dev.values, static_cast<std::size_t>(point.n_estimators));
      scores[fit * per_fit + j] = {
          point, calibration_accuracy(apply_threshold(proba, decision_threshold), dev.labels)};
    }
  });

  GridSearchResult result;
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (better(scores[i], scores[best])) best = i;
  }
  result.best = scores[best].params;
  result.best_dev_accuracy = scores[best].dev_accuracy;
  result.scores = std::move(scores);
  return result;
}

}  // namespace calibqa
