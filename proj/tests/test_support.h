#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "calibqa/interchange.h"
#include "calibqa/matrix.h"

namespace calibqa::testing {

// Reading-comprehension record with pooled embeddings. Candidate texts and
// scores are taken as given; is_correct is filled by exact match.
inline ExampleRecord make_record(const std::string& id, std::vector<double> scores,
                                 std::vector<std::string> texts,
                                 std::vector<std::string> golds, int m = 4) {
  ExampleRecord r;
  r.id = id;
  r.task_kind = TaskKind::kReadingComprehension;
  r.question = "question " + id;
  r.context = "context " + id;
  r.gold_answers = std::move(golds);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    Candidate c;
    c.text = texts[i];
    c.model_score = scores[i];
    c.start_logit = scores[i] / 2;
    c.end_logit = scores[i] / 2;
    c.is_correct = answer_is_correct(c.text, r.gold_answers);
    r.candidates.push_back(c);
  }
  std::vector<float> pooled(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) pooled[static_cast<std::size_t>(j)] = 0.25f * static_cast<float>(j);
  r.embeddings.original = Embedding::Pooled(pooled);
  r.embeddings.hidden_dim = m;
  return r;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("calibqa_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline Matrix random_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix x(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) x(i, j) = n(rng);
  }
  return x;
}

}  // namespace calibqa::testing
