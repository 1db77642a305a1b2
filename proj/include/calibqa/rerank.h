#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "calibqa/calibrator.h"
#include "calibqa/interchange.h"

namespace calibqa {

// Scores the first `count` candidates of a record; higher is better.
using CandidateScorer =
    std::function<std::vector<double>(const ExampleRecord& record, std::size_t count)>;

// Calibrator probability of each candidate, from per-candidate features.
CandidateScorer calibrator_scorer(const CalibratorModel& model);
// The base model's own score; reranking with it changes nothing.
CandidateScorer model_score_scorer();
// Normalized passage probability times normalized span probability.
CandidateScorer normalized_product_scorer();
// Raw passage score times raw span score.
CandidateScorer unnormalized_product_scorer();

struct RerankEntry {
  std::size_t candidate_index = 0;
  // Empty for candidates past top_n, which were not scored.
  std::optional<double> score;
};

struct RerankResult {
  std::string example_id;
  // A permutation of the candidate indices: the scored block by descending
  // score, then the unscored tail in model order.
  std::vector<RerankEntry> reordered;
  bool top1_correct = false;
  bool top5_correct = false;
};

RerankResult rerank_example(const ExampleRecord& record, const CandidateScorer& scorer,
                            std::size_t top_n = 1000, EmMode em_mode = EmMode::kSquad);
RerankResult rerank_example(const ExampleRecord& record, const CalibratorModel& model,
                            std::size_t top_n = 1000, EmMode em_mode = EmMode::kSquad);

struct EmPair {
  double top1 = 0.0;
  double top5 = 0.0;
};

struct RerankEvaluation {
  EmPair reranked;
  // Baselines on the same records: model order, and the two score products.
  EmPair model_order;
  EmPair normalized;
  EmPair unnormalized;
  std::vector<RerankResult> results;
};

RerankEvaluation rerank_eval(std::span<const ExampleRecord> records,
                             const CandidateScorer& scorer, std::size_t top_n = 1000,
                             EmMode em_mode = EmMode::kSquad, int jobs = 1);

// One JSON object per example, newline-terminated.
std::string rerank_result_to_line(const RerankResult& result);
// Tab-separated EM table (percentages) of the reranked order and baselines.
std::string rerank_table(const RerankEvaluation& evaluation);

}  // namespace calibqa
