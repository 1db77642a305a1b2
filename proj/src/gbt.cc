#include "calibqa/gbt.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "calibqa/error.h"
#include "calibqa/interchange.h"

namespace calibqa {

namespace {

constexpr double kMinGain = 1e-6;

struct SplitChoice {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

struct ScanState {
  double g_left = 0.0;
  double h_left = 0.0;
  double last_value = 0.0;
  bool seen = false;
};

std::vector<int> sample_features(const std::vector<int>& pool, double fraction,
                                 std::mt19937_64& rng) {
  if (fraction >= 1.0 || pool.size() <= 1) return pool;
  const auto want = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(pool.size()) + 1e-9)));
  std::vector<int> shuffled = pool;
  for (std::size_t i = 0; i < want; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (shuffled.size() - i));
    std::swap(shuffled[i], shuffled[j]);
  }
  shuffled.resize(want);
  std::sort(shuffled.begin(), shuffled.end());
  return shuffled;
}

double split_midpoint(double lo, double hi) {
  const double mid = lo + (hi - lo) / 2.0;
  // Adjacent doubles: keep `lo` strictly below the threshold.
  return mid > lo ? mid : hi;
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const std::vector<std::vector<std::uint32_t>>& sorted,
              std::span<const double> grad, std::span<const double> hess,
              const GbtHyperparams& hp)
      : x_(x), sorted_(sorted), grad_(grad), hess_(hess), hp_(hp),
        position_(static_cast<std::size_t>(x.rows()), 0) {}

  // Returns the tree; leaf_of()[i] is instance i's leaf afterwards.
  RegressionTree build(std::mt19937_64& rng) {
    RegressionTree tree;
    tree.nodes.emplace_back();
    stats_.assign(1, {0.0, 0.0});
    for (std::size_t i = 0; i < grad_.size(); ++i) {
      stats_[0].first += grad_[i];
      stats_[0].second += hess_[i];
    }

    std::vector<int> all(static_cast<std::size_t>(x_.cols()));
    std::iota(all.begin(), all.end(), 0);
    const std::vector<int> tree_features = sample_features(all, hp_.colsample_by_tree, rng);

    std::vector<int> active = {0};
    for (int depth = 0; depth < hp_.max_depth && !active.empty(); ++depth) {
      const std::vector<int> level_features =
          sample_features(tree_features, hp_.colsample_by_level, rng);
      const std::vector<SplitChoice> best = find_splits(active, level_features, rng);

      std::vector<int> next;
      for (std::size_t s = 0; s < active.size(); ++s) {
        const int node = active[s];
        if (best[s].gain <= kMinGain) continue;
        const int left = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        tree.nodes[node].feature = best[s].feature;
        tree.nodes[node].threshold = best[s].threshold;
        tree.nodes[node].left = left;
        tree.nodes[node].right = left + 1;
        next.push_back(left);
        next.push_back(left + 1);
      }
      if (next.empty()) break;

      stats_.resize(tree.nodes.size(), {0.0, 0.0});
      for (std::size_t i = 0; i < position_.size(); ++i) {
        const TreeNode& n = tree.nodes[position_[i]];
        if (n.is_leaf()) continue;
        const int child =
            x_(static_cast<Eigen::Index>(i), n.feature) < n.threshold ? n.left : n.right;
        position_[i] = child;
        stats_[child].first += grad_[i];
        stats_[child].second += hess_[i];
      }
      active = std::move(next);
    }

    for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
      if (!tree.nodes[k].is_leaf()) continue;
      const auto [g, h] = stats_[k];
      tree.nodes[k].value = -hp_.learning_rate * g / (h + hp_.l2_leaf_reg);
    }
    return tree;
  }

  const std::vector<int>& leaf_of() const { return position_; }

 private:
  std::vector<SplitChoice> find_splits(const std::vector<int>& active,
                                       const std::vector<int>& level_features,
                                       std::mt19937_64& rng) {
    const std::size_t n_features = static_cast<std::size_t>(x_.cols());
    std::vector<int> slot_of(stats_.size(), -1);
    for (std::size_t s = 0; s < active.size(); ++s) slot_of[active[s]] = static_cast<int>(s);

    std::vector<std::vector<char>> allowed(active.size(), std::vector<char>(n_features, 0));
    for (std::size_t s = 0; s < active.size(); ++s) {
      for (const int f : sample_features(level_features, hp_.colsample_by_node, rng)) {
        allowed[s][f] = 1;
      }
    }

    const double lambda = hp_.l2_leaf_reg;
    std::vector<SplitChoice> best(active.size());
    std::vector<ScanState> scan(active.size());
    for (const int f : level_features) {
      std::fill(scan.begin(), scan.end(), ScanState{});
      for (const std::uint32_t idx : sorted_[f]) {
        const int node = position_[idx];
        if (static_cast<std::size_t>(node) >= slot_of.size()) continue;
        const int slot = slot_of[node];
        if (slot < 0 || !allowed[slot][f]) continue;
        ScanState& st = scan[slot];
        const double v = x_(static_cast<Eigen::Index>(idx), f);
        if (st.seen && v > st.last_value) {
          const auto [g_total, h_total] = stats_[node];
          const double g_right = g_total - st.g_left;
          const double h_right = h_total - st.h_left;
          if (st.h_left >= hp_.min_child_weight && h_right >= hp_.min_child_weight) {
            const double gain =
                0.5 * (st.g_left * st.g_left / (st.h_left + lambda) +
                       g_right * g_right / (h_right + lambda) -
                       g_total * g_total / (h_total + lambda));
            if (gain > best[slot].gain) {
              best[slot] = {gain, f, split_midpoint(st.last_value, v)};
            }
          }
        }
        st.g_left += grad_[idx];
        st.h_left += hess_[idx];
        st.last_value = v;
        st.seen = true;
      }
    }
    return best;
  }

  const Matrix& x_;
  const std::vector<std::vector<std::uint32_t>>& sorted_;
  std::span<const double> grad_;
  std::span<const double> hess_;
  const GbtHyperparams& hp_;
  std::vector<int> position_;
  std::vector<std::pair<double, double>> stats_;
};

}  // namespace

void GbtHyperparams::validate() const {
  if (n_estimators < 1) throw InputError("n_estimators must be >= 1");
  if (!(learning_rate > 0.0)) throw InputError("learning_rate must be > 0");
  for (const double c : {colsample_by_tree, colsample_by_level, colsample_by_node}) {
    if (!(c > 0.0 && c <= 1.0)) throw InputError("colsample values must lie in (0, 1]");
  }
  if (max_depth < 0) throw InputError("max_depth must be >= 0");
  if (!(l2_leaf_reg >= 0.0)) throw InputError("l2_leaf_reg must be >= 0");
  if (!(min_child_weight >= 0.0)) throw InputError("min_child_weight must be >= 0");
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double log_loss(std::span<const double> probabilities, std::span<const int> y) {
  constexpr double kEps = 1e-15;
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double p = std::clamp(probabilities[i], kEps, 1.0 - kEps);
    total -= y[i] ? std::log(p) : std::log(1.0 - p);
  }
  return total / static_cast<double>(y.size());
}

void check_training_data(const Matrix& x, std::span<const int> y) {
  if (x.rows() == 0 || x.cols() == 0) throw InputError("training matrix is empty");
  if (static_cast<std::size_t>(x.rows()) != y.size()) {
    throw InputError("feature rows and labels differ in length");
  }
  if (!x.allFinite()) throw InputError("training matrix contains NaN or infinite values");
  std::size_t positives = 0;
  for (const int label : y) {
    if (label != 0 && label != 1) throw InputError("labels must be 0 or 1");
    positives += static_cast<std::size_t>(label);
  }
  if (positives == 0 || positives == y.size()) {
    throw InputError("training labels contain a single class");
  }
}

double RegressionTree::predict(std::span<const double> row) const {
  int k = 0;
  while (!nodes[k].is_leaf()) {
    const TreeNode& n = nodes[k];
    k = row[n.feature] < n.threshold ? n.left : n.right;
  }
  return nodes[k].value;
}

double GbtEnsemble::margin(std::span<const double> row, std::size_t max_rounds) const {
  double m = base_margin;
  const std::size_t rounds = std::min(max_rounds, trees.size());
  for (std::size_t t = 0; t < rounds; ++t) m += trees[t].predict(row);
  return m;
}

double GbtEnsemble::predict_proba(std::span<const double> row, std::size_t max_rounds) const {
  return sigmoid(margin(row, max_rounds));
}

std::vector<double> GbtEnsemble::predict_proba(const Matrix& x, std::size_t max_rounds) const {
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    out[i] = predict_proba(std::span<const double>(x.row(i).data(), x.cols()), max_rounds);
  }
  return out;
}

GbtEnsemble fit_gbt(const Matrix& x, std::span<const int> y, const GbtHyperparams& hp,
                    GbtTrace* trace) {
  hp.validate();
  check_training_data(x, y);
  const auto n = static_cast<std::size_t>(x.rows());
  const auto d = static_cast<std::size_t>(x.cols());

  std::vector<std::vector<std::uint32_t>> sorted(d);
  for (std::size_t f = 0; f < d; ++f) {
    auto& order = sorted[f];
    order.resize(n);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      return x(a, static_cast<Eigen::Index>(f)) < x(b, static_cast<Eigen::Index>(f));
    });
  }

  const double base_rate =
      static_cast<double>(std::accumulate(y.begin(), y.end(), 0)) / static_cast<double>(n);
  GbtEnsemble model;
  model.base_margin = std::log(base_rate / (1.0 - base_rate));
  model.trees.reserve(static_cast<std::size_t>(hp.n_estimators));

  std::vector<double> margins(n, model.base_margin);
  std::vector<double> prob(n), grad(n), hess(n);
  const auto record_loss = [&] {
    if (!trace) return;
    for (std::size_t i = 0; i < n; ++i) prob[i] = sigmoid(margins[i]);
    trace->train_loss.push_back(log_loss(prob, y));
  };
  record_loss();

  for (int t = 0; t < hp.n_estimators; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(margins[i]);
      grad[i] = p - y[i];
      hess[i] = p * (1.0 - p);
    }
    std::mt19937_64 rng(mix_seed(hp.seed, static_cast<std::uint64_t>(t)));
    TreeBuilder builder(x, sorted, grad, hess, hp);
    RegressionTree tree = builder.build(rng);
    const auto& leaf = builder.leaf_of();
    for (std::size_t i = 0; i < n; ++i) margins[i] += tree.nodes[leaf[i]].value;
    model.trees.push_back(std::move(tree));
    record_loss();
  }
  return model;
}

}  // namespace calibqa
