#include "calibqa/rerank.h"

#include <gtest/gtest.h>

#include <set>

#include "calibqa/error.h"
#include "calibqa/synth.h"
#include "json.hpp"
#include "test_support.h"

namespace calibqa {
namespace {

SynthSpec extractive_spec(std::uint64_t seed, int n) {
  SynthSpec spec;
  spec.n_examples = n;
  spec.m = 8;
  spec.task_kind = TaskKind::kOpenExtractive;
  spec.candidates_per_example = 30;
  spec.passages_per_example = 5;
  spec.span_signal = 3.0;
  spec.seed = seed;
  return spec;
}

void expect_permutation(const RerankResult& r, std::size_t n) {
  std::set<std::size_t> seen;
  for (const auto& e : r.reordered) EXPECT_TRUE(seen.insert(e.candidate_index).second);
  EXPECT_EQ(seen.size(), n);
  std::optional<double> prev;
  for (const auto& e : r.reordered) {
    if (!e.score) break;
    if (prev) {
      EXPECT_LE(*e.score, *prev);
    }
    prev = e.score;
  }
}

TEST(RerankTest, ModelScoreOrderIsNoOp) {
  const auto records = generate(extractive_spec(1, 40));
  const auto eval = rerank_eval(records, model_score_scorer());
  EXPECT_EQ(eval.reranked.top1, eval.model_order.top1);
  EXPECT_EQ(eval.reranked.top5, eval.model_order.top5);
  for (std::size_t i = 0; i < records.size(); ++i) {
    expect_permutation(eval.results[i], 30);
    for (std::size_t k = 0; k < 30; ++k) EXPECT_EQ(eval.results[i].reordered[k].candidate_index, k);
  }
}

TEST(RerankTest, MonotoneScorerPreservesOrder) {
  const auto records = generate(extractive_spec(2, 20));
  const CandidateScorer monotone = [](const ExampleRecord& r, std::size_t count) {
    std::vector<double> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(std::exp(r.candidates[i].model_score / 3));
    return out;
  };
  for (const auto& r : records) {
    const RerankResult res = rerank_example(r, monotone);
    for (std::size_t k = 0; k < r.candidates.size(); ++k) EXPECT_EQ(res.reordered[k].candidate_index, k);
  }
}

TEST(RerankTest, NormalizedScorerEqualsNormalizedBaseline) {
  const auto records = generate(extractive_spec(3, 40));
  const auto eval = rerank_eval(records, normalized_product_scorer());
  EXPECT_EQ(eval.reranked.top1, eval.normalized.top1);
  EXPECT_EQ(eval.reranked.top5, eval.normalized.top5);
}

TEST(RerankTest, SwappingScoresFlipsTopOne) {
  ExampleRecord r = testing::make_record("a", {2.0, 1.0}, {"wrong", "right"}, {"right"});
  r.task_kind = TaskKind::kOpenExtractive;
  for (auto& c : r.candidates) {
    c.passage_id = 0;
    c.passage_score = 0.0;
  }
  EXPECT_FALSE(rerank_example(r, model_score_scorer()).top1_correct);
  const CandidateScorer swap = [](const ExampleRecord&, std::size_t) {
    return std::vector<double>{0.1, 0.9};
  };
  const RerankResult res = rerank_example(r, swap);
  EXPECT_TRUE(res.top1_correct);
  EXPECT_EQ(res.reordered[0].candidate_index, 1u);
}

TEST(RerankTest, TiesKeepModelOrderAndTailIsUnscored) {
  const auto records = generate(extractive_spec(4, 5));
  const CandidateScorer flat = [](const ExampleRecord&, std::size_t count) {
    return std::vector<double>(count, 0.5);
  };
  const RerankResult res = rerank_example(records[0], flat, 7);
  for (std::size_t k = 0; k < 30; ++k) {
    EXPECT_EQ(res.reordered[k].candidate_index, k);
    EXPECT_EQ(res.reordered[k].score.has_value(), k < 7);
  }
}

TEST(RerankTest, TopNOneMatchesBaselineTopOne) {
  const auto records = generate(extractive_spec(5, 50));
  const CandidateScorer reverse = [](const ExampleRecord& r, std::size_t count) {
    std::vector<double> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(-r.candidates[i].model_score);
    return out;
  };
  const auto eval = rerank_eval(records, reverse, 1);
  EXPECT_EQ(eval.reranked.top1, eval.model_order.top1);
  EXPECT_GE(eval.reranked.top5, eval.reranked.top1);
}

TEST(RerankTest, RequiresOpenExtractive) {
  const ExampleRecord r = testing::make_record("a", {1.0}, {"x"}, {"x"});
  EXPECT_THROW(rerank_example(r, model_score_scorer()), InputError);
  EXPECT_THROW(rerank_eval({}, model_score_scorer()), InputError);
}

TEST(RerankTest, CalibratorScorerRerankIsPermutation) {
  const auto train = generate(extractive_spec(6, 100));
  const auto test = generate(extractive_spec(7, 30));
  const auto config = FeatureConfig::from_parts("norm_scores,span_embedding", Pooling::kMean, 8);
  LearnerSpec learner;
  learner.gbt.n_estimators = 20;
  learner.gbt.max_depth = 3;
  const auto model = train_calibrator(feature_matrix(train, config, true), config, learner);
  const auto eval = rerank_eval(test, calibrator_scorer(model), 1000, EmMode::kSquad, 2);
  for (const auto& res : eval.results) expect_permutation(res, 30);
  EXPECT_GE(eval.reranked.top5, eval.reranked.top1);
  const auto line = nlohmann::json::parse(rerank_result_to_line(eval.results[0]));
  EXPECT_EQ(line["order"].size(), 30u);
  EXPECT_EQ(line["scores"].size(), 30u);
  EXPECT_TRUE(line["top1_correct"].is_boolean());
}

}  // namespace
}  // namespace calibqa
