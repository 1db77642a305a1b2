#include "calibqa/calibrator.h"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "calibqa/error.h"
#include "json.hpp"

namespace calibqa {

using nlohmann::json;

namespace {

constexpr std::string_view kModelFormatName = "calibqa-model";

json gbt_params_to_json(const GbtHyperparams& hp) {
  return json{{"n_estimators", hp.n_estimators},
              {"learning_rate", hp.learning_rate},
              {"colsample_by_tree", hp.colsample_by_tree},
              {"colsample_by_level", hp.colsample_by_level},
              {"colsample_by_node", hp.colsample_by_node},
              {"max_depth", hp.max_depth},
              {"l2_leaf_reg", hp.l2_leaf_reg},
              {"min_child_weight", hp.min_child_weight},
              {"seed", hp.seed}};
}

GbtHyperparams gbt_params_from_json(const json& j) {
  GbtHyperparams hp;
  hp.n_estimators = j.at("n_estimators").get<int>();
  hp.learning_rate = j.at("learning_rate").get<double>();
  hp.colsample_by_tree = j.at("colsample_by_tree").get<double>();
  hp.colsample_by_level = j.at("colsample_by_level").get<double>();
  hp.colsample_by_node = j.at("colsample_by_node").get<double>();
  hp.max_depth = j.at("max_depth").get<int>();
  hp.l2_leaf_reg = j.at("l2_leaf_reg").get<double>();
  hp.min_child_weight = j.at("min_child_weight").get<double>();
  hp.seed = j.at("seed").get<std::uint64_t>();
  return hp;
}

json tree_to_json(const RegressionTree& tree) {
  json feature = json::array(), threshold = json::array(), left = json::array(),
       right = json::array(), value = json::array();
  for (const TreeNode& n : tree.nodes) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.value);
  }
  return json{{"feature", feature}, {"threshold", threshold}, {"left", left},
              {"right", right},     {"value", value}};
}

RegressionTree tree_from_json(const json& j) {
  const auto feature = j.at("feature").get<std::vector<int>>();
  const auto threshold = j.at("threshold").get<std::vector<double>>();
  const auto left = j.at("left").get<std::vector<int>>();
  const auto right = j.at("right").get<std::vector<int>>();
  const auto value = j.at("value").get<std::vector<double>>();
  const std::size_t n = feature.size();
  if (threshold.size() != n || left.size() != n || right.size() != n || value.size() != n) {
    throw InputError("model file: tree arrays differ in length");
  }
  RegressionTree tree;
  tree.nodes.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    tree.nodes[k] = TreeNode{feature[k], threshold[k], left[k], right[k], value[k]};
    if (feature[k] >= 0) {
      const auto ok = [n](int c) { return c > 0 && static_cast<std::size_t>(c) < n; };
      if (!ok(left[k]) || !ok(right[k])) throw InputError("model file: bad child index");
    }
  }
  if (n == 0) throw InputError("model file: empty tree");
  return tree;
}

json matrix_to_json(const Matrix& m) {
  return json{{"rows", m.rows()},
              {"cols", m.cols()},
              {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<std::size_t>(rows * cols) != data.size()) {
    throw InputError("model file: matrix payload size mismatch");
  }
  Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

}  // namespace

std::string_view to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::kGbt: return "gbt";
    case LearnerKind::kLogistic: return "logistic";
    case LearnerKind::kKnn: return "knn";
  }
  return "?";
}

LearnerKind parse_learner_kind(std::string_view name) {
  if (name == "gbt") return LearnerKind::kGbt;
  if (name == "logistic") return LearnerKind::kLogistic;
  if (name == "knn") return LearnerKind::kKnn;
  throw InputError("unknown learner '" + std::string(name) + "'");
}

std::vector<int> apply_threshold(std::span<const double> probabilities, double threshold) {
  std::vector<int> out(probabilities.size());
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    out[i] = probabilities[i] >= threshold ? 1 : 0;
  }
  return out;
}

CalibratorModel::CalibratorModel(FeatureConfig config, State state, double decision_threshold)
    : config_(std::move(config)), fingerprint_(config_.fingerprint()), state_(std::move(state)),
      threshold_(0.5) {
  set_decision_threshold(decision_threshold);
}

LearnerKind CalibratorModel::kind() const {
  switch (state_.index()) {
    case 0: return LearnerKind::kGbt;
    case 1: return LearnerKind::kLogistic;
    default: return LearnerKind::kKnn;
  }
}

void CalibratorModel::set_decision_threshold(double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw InputError("decision threshold must lie in (0, 1)");
  }
  threshold_ = threshold;
}

void CalibratorModel::check_fingerprint(const std::string& fingerprint) const {
  if (fingerprint != fingerprint_) {
    throw CompatibilityError(fmt::format(
        "feature fingerprint {} does not match the model's {} ({})", fingerprint,
        fingerprint_, config_.canonical_text()));
  }
}

std::vector<double> CalibratorModel::predict_proba_raw(const Matrix& x) const {
  if (static_cast<std::size_t>(x.cols()) != config_.dimension()) {
    throw CompatibilityError(fmt::format("feature width {} does not match the model's {}",
                                         x.cols(), config_.dimension()));
  }
  return std::visit(
      [&](const auto& s) -> std::vector<double> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GbtState>) {
          return s.ensemble.predict_proba(x);
        } else if constexpr (std::is_same_v<T, LogisticState>) {
          return s.model.predict_proba(x);
        } else {
          return s.predict_proba(x);
        }
      },
      state_);
}

std::vector<double> CalibratorModel::predict_proba(const FeatureMatrix& features) const {
  check_fingerprint(features.fingerprint);
  return predict_proba_raw(features.values);
}

std::vector<double> CalibratorModel::predict_proba(const FeatureVector& features) const {
  check_fingerprint(features.config_fingerprint);
  Matrix row(1, static_cast<Eigen::Index>(features.values.size()));
  std::copy(features.values.begin(), features.values.end(), row.data());
  return predict_proba_raw(row);
}

std::vector<int> CalibratorModel::classify(const FeatureMatrix& features) const {
  return apply_threshold(predict_proba(features), threshold_);
}

std::string CalibratorModel::serialize() const {
  json doc{{"format", kModelFormatName},
           {"version", kModelFormatVersion},
           {"kind", to_string(kind())},
           {"feature_config", config_.canonical_text()},
           {"decision_threshold", threshold_}};
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GbtState>) {
          doc["params"] = gbt_params_to_json(s.params);
          json trees = json::array();
          for (const RegressionTree& t : s.ensemble.trees) trees.push_back(tree_to_json(t));
          doc["state"] = json{{"base_margin", s.ensemble.base_margin}, {"trees", trees}};
        } else if constexpr (std::is_same_v<T, LogisticState>) {
          doc["params"] = json{{"l2", s.params.l2},
                               {"max_iters", s.params.max_iters},
                               {"tol", s.params.tol}};
          doc["state"] = json{
              {"weights", std::vector<double>(s.model.weights.data(),
                                              s.model.weights.data() + s.model.weights.size())},
              {"bias", s.model.bias},
              {"iterations", s.model.iterations},
              {"converged", s.model.converged}};
        } else {
          doc["params"] = json{{"k", s.k}};
          doc["state"] = json{{"points", matrix_to_json(s.points)}, {"labels", s.labels}};
        }
      },
      state_);
  return doc.dump() + "\n";
}

CalibratorModel CalibratorModel::deserialize(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != kModelFormatName) {
      throw CompatibilityError("not a calibrator model file");
    }
    const int version = doc.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw CompatibilityError(fmt::format("model file version {} is not supported (expected {})",
                                           version, kModelFormatVersion));
    }
    FeatureConfig config = FeatureConfig::parse(doc.at("feature_config").get<std::string>());
    const double threshold = doc.at("decision_threshold").get<double>();
    const LearnerKind kind = parse_learner_kind(doc.at("kind").get<std::string>());
    const json& params = doc.at("params");
    const json& state = doc.at("state");
    switch (kind) {
      case LearnerKind::kGbt: {
        GbtState s{gbt_params_from_json(params), {}};
        s.ensemble.base_margin = state.at("base_margin").get<double>();
        for (const json& t : state.at("trees")) s.ensemble.trees.push_back(tree_from_json(t));
        return CalibratorModel(std::move(config), std::move(s), threshold);
      }
      case LearnerKind::kLogistic: {
        LogisticState s;
        s.params.l2 = params.at("l2").get<double>();
        s.params.max_iters = params.at("max_iters").get<int>();
        s.params.tol = params.at("tol").get<double>();
        const auto w = state.at("weights").get<std::vector<double>>();
        if (w.size() != config.dimension()) {
          throw CompatibilityError("model file: weight count does not match feature config");
        }
        s.model.weights = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
        s.model.bias = state.at("bias").get<double>();
        s.model.iterations = state.at("iterations").get<int>();
        s.model.converged = state.at("converged").get<bool>();
        return CalibratorModel(std::move(config), std::move(s), threshold);
      }
      case LearnerKind::kKnn: {
        KnnModel s;
        s.k = params.at("k").get<int>();
        s.points = matrix_from_json(state.at("points"));
        s.labels = state.at("labels").get<std::vector<int>>();
        if (s.labels.size() != static_cast<std::size_t>(s.points.rows()) || s.k < 1 ||
            s.k > s.points.rows()) {
          throw InputError("model file: inconsistent knn state");
        }
        return CalibratorModel(std::move(config), std::move(s), threshold);
      }
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("model file is malformed: ") + e.what());
  }
  throw InputError("model file is malformed");
}

void CalibratorModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write model file: " + path.string());
  out << serialize();
}

CalibratorModel CalibratorModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open model file: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return deserialize(buffer.str());
}

CalibratorModel train_calibrator(const FeatureMatrix& train, const FeatureConfig& config,
                                 const LearnerSpec& learner, double decision_threshold) {
  if (train.fingerprint != config.fingerprint()) {
    throw CompatibilityError("training features were built with a different config");
  }
  if (train.labels.size() != train.size()) throw InputError("training features carry no labels");
  switch (learner.kind) {
    case LearnerKind::kGbt:
      return CalibratorModel(config,
                             GbtState{learner.gbt, fit_gbt(train.values, train.labels, learner.gbt)},
                             decision_threshold);
    case LearnerKind::kLogistic:
      return CalibratorModel(
          config,
          LogisticState{learner.logistic,
                        fit_logistic(train.values, train.labels, learner.logistic)},
          decision_threshold);
    case LearnerKind::kKnn:
      return CalibratorModel(config, fit_knn(train.values, train.labels, learner.knn_k),
                             decision_threshold);
  }
  throw InputError("unknown learner");
}

}  // namespace calibqa
