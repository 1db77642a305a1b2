#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "calibqa/features.h"
#include "calibqa/gbt.h"
#include "calibqa/knn.h"
#include "calibqa/linear.h"

namespace calibqa {

inline constexpr int kModelFormatVersion = 1;

enum class LearnerKind { kGbt, kLogistic, kKnn };

std::string_view to_string(LearnerKind kind);
LearnerKind parse_learner_kind(std::string_view name);

struct LearnerSpec {
  LearnerKind kind = LearnerKind::kGbt;
  GbtHyperparams gbt;
  LogisticParams logistic;
  int knn_k = 5;
};

struct GbtState {
  GbtHyperparams params;
  GbtEnsemble ensemble;
};

struct LogisticState {
  LogisticParams params;
  LogisticModel model;
};

// A trained binary correctness predictor bound to the feature config it was
// trained on.
class CalibratorModel {
 public:
  using State = std::variant<GbtState, LogisticState, KnnModel>;

  CalibratorModel(FeatureConfig config, State state, double decision_threshold = 0.5);

  LearnerKind kind() const;
  const FeatureConfig& feature_config() const { return config_; }
  const std::string& fingerprint() const { return fingerprint_; }
  double decision_threshold() const { return threshold_; }
  void set_decision_threshold(double threshold);
  const State& state() const { return state_; }

  // Probability that the scored answer is correct, per row. Throws
  // CompatibilityError when the matrix was built with another config.
  std::vector<double> predict_proba(const FeatureMatrix& features) const;
  std::vector<double> predict_proba(const FeatureVector& features) const;
  // No fingerprint check; columns must follow feature_config().
  std::vector<double> predict_proba_raw(const Matrix& x) const;

  // proba >= decision_threshold.
  std::vector<int> classify(const FeatureMatrix& features) const;

  // Versioned JSON document.
  std::string serialize() const;
  static CalibratorModel deserialize(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static CalibratorModel load(const std::filesystem::path& path);

 private:
  void check_fingerprint(const std::string& fingerprint) const;

  FeatureConfig config_;
  std::string fingerprint_;
  State state_;
  double threshold_;
};

CalibratorModel train_calibrator(const FeatureMatrix& train, const FeatureConfig& config,
                                 const LearnerSpec& learner,
                                 double decision_threshold = 0.5);

std::vector<int> apply_threshold(std::span<const double> probabilities, double threshold);

}  // namespace calibqa
