#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "calibqa/interchange.h"
#include "calibqa/matrix.h"

namespace calibqa {

// Building blocks of a calibrator input. Dimensions:
//   maxprob 1, kamath17 17, emb_* m, span_embedding m, likelihood 1,
//   norm_scores 2, unnorm_scores 2, max_score 1.
enum class FeaturePart {
  kMaxProb,
  kKamath17,
  kEmbOriginal,
  kEmbQuestionBt,
  kEmbContextBt,
  kEmbCls,
  kLikelihood,
  kNormScores,
  kUnnormScores,
  kSpanEmbedding,
  kMaxScore,
};

std::string_view to_string(FeaturePart part);
FeaturePart parse_feature_part(std::string_view name);

// kMean averages token rows; kCls takes the first token row ([CLS]).
enum class Pooling { kMean, kCls };

std::string_view to_string(Pooling pooling);
Pooling parse_pooling(std::string_view name);

struct FeatureConfig {
  std::vector<FeaturePart> parts;
  Pooling pooling = Pooling::kMean;
  int hidden_dim = 0;

  // Nonempty, no repeated parts, hidden_dim > 0 when any part is m-wide.
  void validate() const;

  std::size_t part_dimension(FeaturePart part) const;
  std::size_t dimension() const;
  bool uses_embeddings() const;

  // "parts=kamath17,emb_original;pooling=mean;hidden_dim=768"
  std::string canonical_text() const;
  // 16 hex digits of FNV-1a over canonical_text().
  std::string fingerprint() const;

  static FeatureConfig parse(std::string_view canonical_text);
  // `part_list` is comma separated, e.g. "kamath17,emb_original".
  static FeatureConfig from_parts(std::string_view part_list, Pooling pooling,
                                  int hidden_dim);

  bool operator==(const FeatureConfig&) const = default;
};

struct FeatureVector {
  std::vector<double> values;
  std::string config_fingerprint;
  std::string example_id;
  std::size_t candidate_index = 0;
};

// Column means of an n x m token matrix (a pooled vector passes through).
std::vector<double> pool_mean(const Embedding& tokens);

// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);

// Softmax over the candidates' model scores.
std::vector<double> candidate_softmax(std::span<const Candidate> candidates);

// Per-candidate [passage probability, span probability]: the passage score is
// normalized over the record's distinct passages and the span score over the
// top-10 spans of the candidate's passage.
std::vector<std::array<double, 2>> normalized_scores(const ExampleRecord& record);

// Precomputes record-level quantities once so that per-candidate rows are
// cheap. Holds references: the record and config must outlive the builder.
class FeatureBuilder {
 public:
  FeatureBuilder(const ExampleRecord& record, const FeatureConfig& config);

  std::size_t dimension() const { return dimension_; }

  // Writes the features of one candidate into `out` (size == dimension()).
  void fill(std::size_t candidate_index, std::span<double> out) const;

 private:
  const std::vector<double>& pooled(FeaturePart part) const;

  const ExampleRecord& record_;
  const FeatureConfig& config_;
  std::size_t dimension_;
  std::vector<double> probabilities_;
  std::vector<std::array<double, 2>> normalized_;
  std::vector<double> emb_original_;
  std::vector<double> emb_question_bt_;
  std::vector<double> emb_context_bt_;
  std::vector<double> emb_cls_;
};

FeatureVector build_features(const ExampleRecord& record, std::size_t candidate_index,
                             const FeatureConfig& config);

struct RowKey {
  std::size_t record_index = 0;
  std::size_t candidate_index = 0;
};

struct FeatureMatrix {
  Matrix values;
  // 1 iff the scored candidate is correct. Empty when labels were not read.
  std::vector<int> labels;
  std::vector<RowKey> rows;
  std::string fingerprint;

  std::size_t size() const { return rows.size(); }
};

enum class LabelPolicy { kRequire, kIgnore };

// per_candidate == false: one row per record built from candidate 0 (the
// model's answer). per_candidate == true: one row for each of the first
// `max_candidates` candidates of every record.
FeatureMatrix feature_matrix(std::span<const ExampleRecord> records,
                             const FeatureConfig& config, bool per_candidate,
                             LabelPolicy labels = LabelPolicy::kRequire,
                             std::size_t max_candidates =
                                 std::numeric_limits<std::size_t>::max());

}  // namespace calibqa
