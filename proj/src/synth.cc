#include "calibqa/synth.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/QR>
#include <fmt/format.h>

#include "calibqa/error.h"
#include "calibqa/features.h"
#include "calibqa/matrix.h"
#include "calibqa/parallel.h"

namespace calibqa {

namespace {

constexpr int kLatentDim = 8;
constexpr std::uint64_t kRotationStream = 0x5157a11;
constexpr std::uint64_t kDomainStream = 0xd0a1;
constexpr std::uint64_t kSignalStream = 0x5167;
constexpr int kDistractors = 3;
constexpr int kDeepRankLimit = 20;
constexpr double kDeepCorrectRate = 0.6;

using Rng = std::mt19937_64;

double normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

double uniform(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

double softplus(double x) { return x > 30 ? x : std::log1p(std::exp(x)); }

Vector random_unit(Rng& rng, int m) {
  Vector v(m);
  for (int i = 0; i < m; ++i) v[i] = normal(rng);
  return v / v.norm();
}

// m x 8 map with orthonormal columns (or the leading identity when m < 8).
Matrix rotation(std::uint64_t seed, int m) {
  Matrix r = Matrix::Zero(m, kLatentDim);
  if (m < kLatentDim) {
    for (int i = 0; i < m; ++i) r(i, i) = 1.0;
    return r;
  }
  Rng rng(mix_seed(seed, kRotationStream));
  Eigen::MatrixXd g(m, kLatentDim);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < kLatentDim; ++j) g(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  r = qr.householderQ() * Eigen::MatrixXd::Identity(m, kLatentDim);
  return r;
}

struct Shared {
  Matrix rotation;
  Vector domain_offset;
  Vector signal_direction;
};

std::vector<float> to_floats(const Vector& v) {
  std::vector<float> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<float>(v[i]);
  return out;
}

Embedding embed(const SynthSpec& spec, const Shared& shared, const Vector& latent, Rng& rng) {
  const Vector center = shared.rotation * latent + shared.domain_offset;
  const int rows = std::max(spec.token_rows, 1);
  std::vector<float> data;
  data.reserve(static_cast<std::size_t>(rows) * spec.m);
  for (int r = 0; r < rows; ++r) {
    for (int d = 0; d < spec.m; ++d) {
      data.push_back(static_cast<float>(center[d] + spec.noise_std * normal(rng)));
    }
  }
  if (spec.token_rows == 0) return Embedding::Pooled(std::move(data));
  return Embedding::Tokens(rows, spec.m, std::move(data));
}

// Descending model scores: a leading gap that grows with the confidence c,
// then smaller steps.
std::vector<double> candidate_scores(double c, int count, bool wide, Rng& rng) {
  std::vector<double> s(static_cast<std::size_t>(count));
  s[0] = 2.0 + c;
  for (int j = 1; j < count; ++j) {
    const double step =
        j == 1 ? softplus(c) : (wide ? 0.1 + 0.2 * std::abs(normal(rng)) : 0.5);
    s[static_cast<std::size_t>(j)] = s[static_cast<std::size_t>(j) - 1] - step;
  }
  return s;
}

AuxSignals make_aux(const ExampleRecord& rec, Rng& rng) {
  const std::vector<double> p = candidate_softmax(rec.candidates);
  AuxSignals aux;
  for (std::size_t k = 0; k < 5; ++k) {
    const double v = k < p.size() ? p[k] : 0.0;
    aux.top5_softmax[k] = v;
    aux.dropout_mean_top5[k] = std::clamp(v + 0.02 * normal(rng), 0.0, 1.0);
    aux.dropout_var_top5[k] = 0.01 * std::abs(normal(rng));
  }
  aux.context_length = rec.context ? 80 + uniform_int(rng, 0, 120) : 0;
  aux.prediction_length = 2;
  return aux;
}

ExampleRecord make_example(const SynthSpec& spec, const Shared& shared, int index) {
  Rng rng(mix_seed(mix_seed(spec.seed, static_cast<std::uint64_t>(spec.domain) + 1),
                   static_cast<std::uint64_t>(index)));
  Vector z(kLatentDim);
  for (int k = 0; k < kLatentDim; ++k) z[k] = normal(rng);

  const double s = spec.label_noise;
  const double u = std::clamp(uniform(rng), 1e-12, 1.0 - 1e-12);
  const double utility = z[0] + s * std::log(u / (1.0 - u)) + spec.label_offset;
  const bool correct = utility > 0.0;
  const double utility_sd = std::sqrt(1.0 + s * s * std::numbers::pi * std::numbers::pi / 3.0);
  const double si = spec.score_informativeness;
  const double c = si * utility / utility_sd + std::sqrt(1.0 - si * si) * normal(rng) +
                   spec.noise_std * normal(rng);

  ExampleRecord rec;
  rec.id = fmt::format("synth-d{}-{:06d}", spec.domain, index);
  rec.task_kind = spec.task_kind;
  rec.question = fmt::format("question {} of domain {}", index, spec.domain);
  const std::string gold = fmt::format("answer {}", index);
  rec.gold_answers = {gold};
  if (spec.task_kind != TaskKind::kOpenGenerative) {
    rec.context = fmt::format("passage text for question {} containing {}", index, gold);
  }

  const bool extractive = spec.task_kind == TaskKind::kOpenExtractive;
  const int count = spec.candidates_per_example;
  const std::vector<double> scores = candidate_scores(c, count, extractive, rng);

  std::vector<std::string> texts(static_cast<std::size_t>(count));
  texts[0] = correct ? gold : fmt::format("wrong {} 0", index);
  for (int j = 1; j < count; ++j) texts[static_cast<std::size_t>(j)] = fmt::format("alt {} {}", index, j);

  // Open-extractive: a correct span may sit deeper in the list, and a few
  // distractors share its planted span signal.
  std::vector<bool> plausible(static_cast<std::size_t>(count), false);
  if (extractive) {
    int deep = -1;
    const int max_rank = std::min(count, kDeepRankLimit) - 1;
    if (!correct && max_rank >= 1 && uniform(rng) < kDeepCorrectRate) {
      deep = uniform_int(rng, 1, max_rank);
      texts[static_cast<std::size_t>(deep)] = gold;
    }
    if (correct) plausible[0] = true;
    if (deep > 0) plausible[static_cast<std::size_t>(deep)] = true;
    for (int d = 0; d < kDistractors && count > 1; ++d) {
      plausible[static_cast<std::size_t>(uniform_int(rng, 1, count - 1))] = true;
    }
  }

  std::vector<double> passage_scores;
  for (int p = 0; p < spec.passages_per_example; ++p) {
    passage_scores.push_back(normal(rng) + (p == 0 ? 1.0 + 0.5 * c : 0.0));
  }

  for (int j = 0; j < count; ++j) {
    const auto uj = static_cast<std::size_t>(j);
    Candidate cand;
    cand.text = texts[uj];
    cand.model_score = scores[uj];
    if (spec.task_kind == TaskKind::kOpenGenerative) {
      cand.log_likelihood = scores[uj] - 3.0;
      cand.model_score = *cand.log_likelihood;
    } else {
      cand.start_logit = scores[uj] / 2.0;
      cand.end_logit = scores[uj] - *cand.start_logit;
    }
    if (extractive) {
      const int passage = j == 0 ? 0 : uniform_int(rng, 0, spec.passages_per_example - 1);
      cand.passage_id = passage;
      cand.passage_score = passage_scores[static_cast<std::size_t>(passage)];
      Vector span(spec.m);
      for (int d = 0; d < spec.m; ++d) span[d] = normal(rng);
      if (plausible[uj]) span += spec.span_signal * shared.signal_direction;
      cand.span_embedding = to_floats(span);
    }
    cand.is_correct = answer_is_correct(cand.text, rec.gold_answers);
    rec.candidates.push_back(std::move(cand));
  }

  const double ei = spec.embedding_informativeness;
  Vector eta(kLatentDim);
  for (int k = 0; k < kLatentDim; ++k) eta[k] = normal(rng);
  const Vector latent = ei * z + std::sqrt(1.0 - ei * ei) * eta;
  const auto perturbed = [&] {
    Vector v = latent;
    for (int k = 0; k < kLatentDim; ++k) v[k] += 0.3 * normal(rng);
    return v;
  };
  rec.embeddings.hidden_dim = spec.m;
  rec.embeddings.original = embed(spec, shared, latent, rng);
  if (spec.include_backtranslation) {
    rec.embeddings.question_bt = embed(spec, shared, perturbed(), rng);
    rec.embeddings.context_bt = embed(spec, shared, perturbed(), rng);
  }
  if (spec.include_cls) {
    Vector cls = shared.rotation * (0.7 * latent) + shared.domain_offset;
    for (int d = 0; d < spec.m; ++d) cls[d] += spec.noise_std * normal(rng);
    rec.embeddings.cls = to_floats(cls);
  }
  if (spec.include_aux) rec.aux = make_aux(rec, rng);
  return rec;
}

}  // namespace

void SynthSpec::validate() const {
  if (n_examples < 1) throw InputError("n_examples must be at least 1");
  if (m < 1) throw InputError("m must be at least 1");
  if (score_informativeness < 0 || score_informativeness > 1) {
    throw InputError("score_informativeness must lie in [0,1]");
  }
  if (embedding_informativeness < 0 || embedding_informativeness > 1) {
    throw InputError("embedding_informativeness must lie in [0,1]");
  }
  if (candidates_per_example < 1) throw InputError("candidates_per_example must be at least 1");
  if (passages_per_example < 1) throw InputError("passages_per_example must be at least 1");
  if (!(noise_std >= 0) || !(label_noise >= 0)) throw InputError("noise scales must be >= 0");
  if (token_rows < 0) throw InputError("token_rows must be >= 0");
  if (domain < 0) throw InputError("domain must be >= 0");
}

std::vector<ExampleRecord> generate(const SynthSpec& spec, int jobs) {
  spec.validate();
  Shared shared;
  shared.rotation = rotation(spec.encoder_seed, spec.m);
  Rng domain_rng(mix_seed(mix_seed(spec.encoder_seed, kDomainStream), static_cast<std::uint64_t>(spec.domain)));
  shared.domain_offset = spec.domain_shift * random_unit(domain_rng, spec.m);
  Rng signal_rng(mix_seed(spec.encoder_seed, kSignalStream));
  shared.signal_direction = random_unit(signal_rng, spec.m);

  std::vector<ExampleRecord> out(static_cast<std::size_t>(spec.n_examples));
  parallel_for(out.size(), jobs, [&](std::size_t i) {
    out[i] = make_example(spec, shared, static_cast<int>(i));
  });
  return out;
}

}  // namespace calibqa
