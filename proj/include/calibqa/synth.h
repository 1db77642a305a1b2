#pragma once

#include <cstdint>
#include <vector>

#include "calibqa/interchange.h"

namespace calibqa {

// Synthetic record generator. Each example draws a latent z ~ N(0, I_8); the
// answer is correct iff z_0 + logistic noise + label_offset > 0. The model
// score sees that utility through score_informativeness, the embeddings see z
// through embedding_informativeness (rotated into m dims).
struct SynthSpec {
  int n_examples = 1000;
  int m = 16;
  double score_informativeness = 0.5;
  double embedding_informativeness = 0.5;
  int candidates_per_example = 5;
  int passages_per_example = 4;
  double noise_std = 0.5;
  std::uint64_t seed = 0;
  // Fixes the latent rotation, domain directions and span-signal direction;
  // files drawn with different `seed`s share them.
  std::uint64_t encoder_seed = 0;

  TaskKind task_kind = TaskKind::kReadingComprehension;
  // Token rows per embedding; 0 emits pooled vectors.
  int token_rows = 8;
  bool include_backtranslation = true;
  bool include_cls = true;
  bool include_aux = true;
  // Scale of the logistic label noise; 0 makes labels a function of z.
  double label_noise = 0.3;
  double label_offset = 0.0;
  // Records of different domains get different ids and an embedding offset
  // of length domain_shift along a domain-specific direction.
  int domain = 0;
  double domain_shift = 0.0;
  // Open-extractive only: offset planted in the span embeddings of the
  // correct candidates and a few distractors.
  double span_signal = 0.0;

  void validate() const;
};

std::vector<ExampleRecord> generate(const SynthSpec& spec, int jobs = 1);

}  // namespace calibqa
