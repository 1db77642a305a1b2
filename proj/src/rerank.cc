#include "calibqa/rerank.h"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "calibqa/error.h"
#include "calibqa/features.h"
#include "calibqa/parallel.h"
#include "json.hpp"

namespace calibqa {

CandidateScorer calibrator_scorer(const CalibratorModel& model) {
  return [&model](const ExampleRecord& record, std::size_t count) {
    const FeatureBuilder builder(record, model.feature_config());
    Matrix x(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(builder.dimension()));
    for (std::size_t i = 0; i < count; ++i) {
      builder.fill(i,
                   std::span<double>(x.row(static_cast<Eigen::Index>(i)).data(),
                                     builder.dimension()));
    }
    return model.predict_proba_raw(x);
  };
}

CandidateScorer model_score_scorer() {
  return [](const ExampleRecord& record, std::size_t count) {
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = record.candidates[i].model_score;
    return out;
  };
}

CandidateScorer normalized_product_scorer() {
  return [](const ExampleRecord& record, std::size_t count) {
    const auto probs = normalized_scores(record);
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = probs[i][0] * probs[i][1];
    return out;
  };
}

CandidateScorer unnormalized_product_scorer() {
  return [](const ExampleRecord& record, std::size_t count) {
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
      const Candidate& c = record.candidates[i];
      if (!c.passage_score) throw MissingFeatureError("passage_score", record.id);
      out[i] = *c.passage_score * c.model_score;
    }
    return out;
  };
}

RerankResult rerank_example(const ExampleRecord& record, const CandidateScorer& scorer,
                            std::size_t top_n, EmMode em_mode) {
  if (record.task_kind != TaskKind::kOpenExtractive) {
    throw InputError("record '" + record.id + "': reranking needs open_extractive records");
  }
  if (top_n == 0) throw InputError("top_n must be positive");
  const std::size_t total = record.candidates.size();
  const std::size_t scored = std::min(top_n, total);
  const std::vector<double> scores = scorer(record, scored);
  if (scores.size() != scored) throw Error(ExitCode::kFailure, "scorer returned wrong length");

  std::vector<std::size_t> order(scored);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RerankResult result;
  result.example_id = record.id;
  result.reordered.reserve(total);
  for (const std::size_t i : order) result.reordered.push_back({i, scores[i]});
  for (std::size_t i = scored; i < total; ++i) result.reordered.push_back({i, std::nullopt});

  for (std::size_t k = 0; k < result.reordered.size() && k < 5; ++k) {
    const Candidate& c = record.candidates[result.reordered[k].candidate_index];
    if (answer_is_correct(c.text, record.gold_answers, em_mode)) {
      if (k == 0) result.top1_correct = true;
      result.top5_correct = true;
    }
  }
  return result;
}

RerankResult rerank_example(const ExampleRecord& record, const CalibratorModel& model,
                            std::size_t top_n, EmMode em_mode) {
  return rerank_example(record, calibrator_scorer(model), top_n, em_mode);
}

namespace {

EmPair em_of(std::span<const RerankResult> results) {
  EmPair em;
  for (const RerankResult& r : results) {
    em.top1 += r.top1_correct ? 1.0 : 0.0;
    em.top5 += r.top5_correct ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(results.size());
  em.top1 /= n;
  em.top5 /= n;
  return em;
}

std::vector<RerankResult> rerank_all(std::span<const ExampleRecord> records,
                                     const CandidateScorer& scorer, std::size_t top_n,
                                     EmMode em_mode, int jobs) {
  std::vector<RerankResult> out(records.size());
  parallel_for(records.size(), jobs, [&](std::size_t i) {
    out[i] = rerank_example(records[i], scorer, top_n, em_mode);
  });
  return out;
}

}  // namespace

RerankEvaluation rerank_eval(std::span<const ExampleRecord> records,
                             const CandidateScorer& scorer, std::size_t top_n, EmMode em_mode,
                             int jobs) {
  if (records.empty()) throw InputError("no records to rerank");
  RerankEvaluation eval;
  eval.results = rerank_all(records, scorer, top_n, em_mode, jobs);
  eval.reranked = em_of(eval.results);
  eval.model_order = em_of(rerank_all(records, model_score_scorer(), top_n, em_mode, jobs));
  eval.normalized =
      em_of(rerank_all(records, normalized_product_scorer(), top_n, em_mode, jobs));
  eval.unnormalized =
      em_of(rerank_all(records, unnormalized_product_scorer(), top_n, em_mode, jobs));
  return eval;
}

std::string rerank_result_to_line(const RerankResult& result) {
  nlohmann::json order = nlohmann::json::array();
  nlohmann::json scores = nlohmann::json::array();
  for (const RerankEntry& e : result.reordered) {
    order.push_back(e.candidate_index);
    scores.push_back(e.score ? nlohmann::json(*e.score) : nlohmann::json(nullptr));
  }
  const nlohmann::json line{{"id", result.example_id},
                            {"order", std::move(order)},
                            {"scores", std::move(scores)},
                            {"top1_correct", result.top1_correct},
                            {"top5_correct", result.top5_correct}};
  return line.dump() + "\n";
}

std::string rerank_table(const RerankEvaluation& evaluation) {
  std::string out = "ordering\ttop1_em\ttop5_em\n";
  const auto row = [&](const char* name, const EmPair& em) {
    out += fmt::format("{}\t{:.1f}\t{:.1f}\n", name, 100.0 * em.top1, 100.0 * em.top5);
  };
  row("model", evaluation.model_order);
  row("normalized", evaluation.normalized);
  row("unnormalized", evaluation.unnormalized);
  row("reranked", evaluation.reranked);
  return out;
}

}  // namespace calibqa
