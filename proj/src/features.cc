#include "calibqa/features.h"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "calibqa/error.h"

namespace calibqa {

namespace {

struct PartName {
  FeaturePart part;
  std::string_view name;
};

constexpr std::array<PartName, 11> kPartNames = {{
    {FeaturePart::kMaxProb, "maxprob"},
    {FeaturePart::kKamath17, "kamath17"},
    {FeaturePart::kEmbOriginal, "emb_original"},
    {FeaturePart::kEmbQuestionBt, "emb_question_bt"},
    {FeaturePart::kEmbContextBt, "emb_context_bt"},
    {FeaturePart::kEmbCls, "emb_cls"},
    {FeaturePart::kLikelihood, "likelihood"},
    {FeaturePart::kNormScores, "norm_scores"},
    {FeaturePart::kUnnormScores, "unnorm_scores"},
    {FeaturePart::kSpanEmbedding, "span_embedding"},
    {FeaturePart::kMaxScore, "max_score"},
}};

constexpr std::size_t kSpansPerPassage = 10;

bool is_embedding_part(FeaturePart part) {
  switch (part) {
    case FeaturePart::kEmbOriginal:
    case FeaturePart::kEmbQuestionBt:
    case FeaturePart::kEmbContextBt:
    case FeaturePart::kEmbCls:
    case FeaturePart::kSpanEmbedding:
      return true;
    default:
      return false;
  }
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(sep, start), text.size());
    out.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double log_sum_exp(std::span<const double> values) {
  const double top = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (const double v : values) sum += std::exp(v - top);
  return top + std::log(sum);
}

}  // namespace

std::string_view to_string(FeaturePart part) {
  for (const auto& entry : kPartNames) {
    if (entry.part == part) return entry.name;
  }
  return "?";
}

FeaturePart parse_feature_part(std::string_view name) {
  name = trim(name);
  for (const auto& entry : kPartNames) {
    if (entry.name == name) return entry.part;
  }
  if (name == "baseline17") return FeaturePart::kKamath17;
  throw InputError("unknown feature part '" + std::string(name) + "'");
}

std::string_view to_string(Pooling pooling) {
  return pooling == Pooling::kMean ? "mean" : "cls";
}

Pooling parse_pooling(std::string_view name) {
  name = trim(name);
  if (name == "mean") return Pooling::kMean;
  if (name == "cls") return Pooling::kCls;
  throw InputError("unknown pooling '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// FeatureConfig

void FeatureConfig::validate() const {
  if (parts.empty()) throw InputError("feature config has no parts");
  for (std::size_t i = 0; i < parts.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (parts[i] == parts[j]) {
        throw InputError("feature part '" + std::string(to_string(parts[i])) +
                         "' listed twice");
      }
    }
  }
  if (uses_embeddings() && hidden_dim <= 0) {
    throw InputError("embedding feature parts need a positive hidden_dim");
  }
  if (hidden_dim < 0) throw InputError("hidden_dim must be nonnegative");
}

std::size_t FeatureConfig::part_dimension(FeaturePart part) const {
  switch (part) {
    case FeaturePart::kMaxProb: return 1;
    case FeaturePart::kKamath17: return 17;
    case FeaturePart::kLikelihood: return 1;
    case FeaturePart::kNormScores: return 2;
    case FeaturePart::kUnnormScores: return 2;
    case FeaturePart::kMaxScore: return 1;
    case FeaturePart::kEmbOriginal:
    case FeaturePart::kEmbQuestionBt:
    case FeaturePart::kEmbContextBt:
    case FeaturePart::kEmbCls:
    case FeaturePart::kSpanEmbedding:
      return static_cast<std::size_t>(hidden_dim);
  }
  return 0;
}

std::size_t FeatureConfig::dimension() const {
  std::size_t total = 0;
  for (const FeaturePart p : parts) total += part_dimension(p);
  return total;
}

bool FeatureConfig::uses_embeddings() const {
  return std::any_of(parts.begin(), parts.end(), is_embedding_part);
}

std::string FeatureConfig::canonical_text() const {
  std::string names;
  for (const FeaturePart p : parts) {
    if (!names.empty()) names += ',';
    names += to_string(p);
  }
  return fmt::format("parts={};pooling={};hidden_dim={}", names, to_string(pooling),
                     hidden_dim);
}

std::string FeatureConfig::fingerprint() const {
  return fmt::format("{:016x}", fnv1a64(canonical_text()));
}

FeatureConfig FeatureConfig::parse(std::string_view canonical) {
  FeatureConfig config;
  bool have_parts = false;
  bool have_pooling = false;
  bool have_dim = false;
  for (const std::string_view field : split(canonical, ';')) {
    const std::size_t eq = field.find('=');
    if (eq == std::string_view::npos) {
      throw InputError("malformed feature config field '" + std::string(field) + "'");
    }
    const std::string_view key = trim(field.substr(0, eq));
    const std::string_view value = trim(field.substr(eq + 1));
    if (key == "parts") {
      for (const std::string_view name : split(value, ',')) {
        config.parts.push_back(parse_feature_part(name));
      }
      have_parts = true;
    } else if (key == "pooling") {
      config.pooling = parse_pooling(value);
      have_pooling = true;
    } else if (key == "hidden_dim") {
      try {
        config.hidden_dim = std::stoi(std::string(value));
      } catch (const std::exception&) {
        throw InputError("malformed hidden_dim '" + std::string(value) + "'");
      }
      have_dim = true;
    } else {
      throw InputError("unknown feature config key '" + std::string(key) + "'");
    }
  }
  if (!have_parts || !have_pooling || !have_dim) {
    throw InputError("feature config needs parts, pooling and hidden_dim");
  }
  config.validate();
  return config;
}

FeatureConfig FeatureConfig::from_parts(std::string_view part_list, Pooling pooling,
                                        int hidden_dim) {
  FeatureConfig config;
  for (const std::string_view name : split(part_list, ',')) {
    if (trim(name).empty()) continue;
    config.parts.push_back(parse_feature_part(name));
  }
  config.pooling = pooling;
  config.hidden_dim = hidden_dim;
  config.validate();
  return config;
}

// ---------------------------------------------------------------------------
// Primitives

std::vector<double> pool_mean(const Embedding& tokens) {
  if (tokens.rows < 1 || tokens.dim < 1 ||
      tokens.data.size() != static_cast<std::size_t>(tokens.rows) * tokens.dim) {
    throw InputError("pool_mean needs a nonempty n x m matrix");
  }
  std::vector<double> out(static_cast<std::size_t>(tokens.dim), 0.0);
  for (int r = 0; r < tokens.rows; ++r) {
    const auto row = tokens.row(r);
    for (int j = 0; j < tokens.dim; ++j) {
      if (!std::isfinite(row[j])) throw InputError("pool_mean input is not finite");
      out[j] += row[j];
    }
  }
  const double inv = 1.0 / tokens.rows;
  for (double& v : out) v *= inv;
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  const double lse = log_sum_exp(logits);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = std::exp(logits[i] - lse);
  return out;
}

std::vector<double> candidate_softmax(std::span<const Candidate> candidates) {
  std::vector<double> scores(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) scores[i] = candidates[i].model_score;
  return softmax(scores);
}

std::vector<std::array<double, 2>> normalized_scores(const ExampleRecord& record) {
  const auto& cands = record.candidates;
  // Distinct passages in order of first appearance.
  std::map<std::int64_t, std::size_t> passage_slot;
  std::vector<double> passage_logits;
  std::vector<std::vector<double>> span_scores;
  std::vector<std::size_t> slot_of(cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const Candidate& c = cands[i];
    if (!c.passage_id || !c.passage_score) {
      throw MissingFeatureError("norm_scores", record.id);
    }
    auto [it, inserted] = passage_slot.emplace(*c.passage_id, passage_logits.size());
    if (inserted) {
      passage_logits.push_back(*c.passage_score);
      span_scores.emplace_back();
    }
    slot_of[i] = it->second;
    span_scores[it->second].push_back(c.model_score);
  }
  const std::vector<double> passage_prob = softmax(passage_logits);
  std::vector<double> span_lse(span_scores.size());
  for (std::size_t p = 0; p < span_scores.size(); ++p) {
    auto& s = span_scores[p];
    std::sort(s.begin(), s.end(), std::greater<>());
    if (s.size() > kSpansPerPassage) s.resize(kSpansPerPassage);
    span_lse[p] = log_sum_exp(s);
  }
  std::vector<std::array<double, 2>> out(cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) {
    out[i] = {passage_prob[slot_of[i]], std::exp(cands[i].model_score - span_lse[slot_of[i]])};
  }
  return out;
}

// ---------------------------------------------------------------------------
// FeatureBuilder

namespace {

std::vector<double> embedding_feature(const Embedding& e, Pooling pooling,
                                      FeaturePart part, const std::string& id) {
  if (pooling == Pooling::kMean) return pool_mean(e);
  if (e.kind != Embedding::Kind::kTokens) {
    throw MissingFeatureError(std::string(to_string(part)) + " (cls pooling needs tokens)", id);
  }
  const auto row = e.row(0);
  return {row.begin(), row.end()};
}

}  // namespace

FeatureBuilder::FeatureBuilder(const ExampleRecord& record, const FeatureConfig& config)
    : record_(record), config_(config), dimension_(config.dimension()) {
  config.validate();
  if (record.candidates.empty()) throw InputError("record '" + record.id + "' has no candidates");
  if (config.uses_embeddings() && record.embeddings.hidden_dim != config.hidden_dim) {
    throw CompatibilityError(fmt::format(
        "record '{}' has hidden_dim {} but the feature config expects {}", record.id,
        record.embeddings.hidden_dim, config.hidden_dim));
  }
  const auto& emb = record.embeddings;
  for (const FeaturePart part : config.parts) {
    switch (part) {
      case FeaturePart::kMaxProb:
        probabilities_ = candidate_softmax(record.candidates);
        break;
      case FeaturePart::kKamath17:
        if (!record.aux) throw MissingFeatureError("kamath17", record.id);
        probabilities_ = candidate_softmax(record.candidates);
        break;
      case FeaturePart::kNormScores:
        normalized_ = normalized_scores(record);
        break;
      case FeaturePart::kEmbOriginal:
        emb_original_ = embedding_feature(emb.original, config.pooling, part, record.id);
        break;
      case FeaturePart::kEmbQuestionBt:
        if (!emb.question_bt) throw MissingFeatureError("emb_question_bt", record.id);
        emb_question_bt_ = embedding_feature(*emb.question_bt, config.pooling, part, record.id);
        break;
      case FeaturePart::kEmbContextBt:
        if (!emb.context_bt) throw MissingFeatureError("emb_context_bt", record.id);
        emb_context_bt_ = embedding_feature(*emb.context_bt, config.pooling, part, record.id);
        break;
      case FeaturePart::kEmbCls:
        if (!emb.cls) throw MissingFeatureError("emb_cls", record.id);
        emb_cls_.assign(emb.cls->begin(), emb.cls->end());
        break;
      default:
        break;
    }
  }
  std::sort(probabilities_.begin(), probabilities_.end(), std::greater<>());
}

const std::vector<double>& FeatureBuilder::pooled(FeaturePart part) const {
  switch (part) {
    case FeaturePart::kEmbOriginal: return emb_original_;
    case FeaturePart::kEmbQuestionBt: return emb_question_bt_;
    case FeaturePart::kEmbContextBt: return emb_context_bt_;
    default: return emb_cls_;
  }
}

void FeatureBuilder::fill(std::size_t candidate_index, std::span<double> out) const {
  if (candidate_index >= record_.candidates.size()) {
    throw InputError(fmt::format("record '{}' has no candidate {}", record_.id, candidate_index));
  }
  if (out.size() != dimension_) throw InputError("feature output buffer has the wrong size");
  const Candidate& cand = record_.candidates[candidate_index];
  std::size_t pos = 0;
  const auto put = [&](double v) { out[pos++] = v; };

  for (const FeaturePart part : config_.parts) {
    switch (part) {
      case FeaturePart::kMaxProb:
        put(probabilities_.front());
        break;
      case FeaturePart::kKamath17: {
        const AuxSignals& aux = *record_.aux;
        put(probabilities_.front());
        for (std::size_t k = 1; k < 5; ++k) {
          put(k < probabilities_.size() ? probabilities_[k] : 0.0);
        }
        for (const double v : aux.dropout_mean_top5) put(v);
        for (const double v : aux.dropout_var_top5) put(v);
        put(static_cast<double>(aux.context_length));
        put(static_cast<double>(aux.prediction_length));
        break;
      }
      case FeaturePart::kEmbOriginal:
      case FeaturePart::kEmbQuestionBt:
      case FeaturePart::kEmbContextBt:
      case FeaturePart::kEmbCls:
        for (const double v : pooled(part)) put(v);
        break;
      case FeaturePart::kSpanEmbedding:
        if (!cand.span_embedding) throw MissingFeatureError("span_embedding", record_.id);
        for (const float v : *cand.span_embedding) put(v);
        break;
      case FeaturePart::kLikelihood:
        if (!cand.log_likelihood) throw MissingFeatureError("likelihood", record_.id);
        put(std::exp(*cand.log_likelihood));
        break;
      case FeaturePart::kNormScores:
        put(normalized_[candidate_index][0]);
        put(normalized_[candidate_index][1]);
        break;
      case FeaturePart::kUnnormScores:
        if (!cand.passage_score) throw MissingFeatureError("unnorm_scores", record_.id);
        put(*cand.passage_score);
        put(cand.model_score);
        break;
      case FeaturePart::kMaxScore: {
        double best = record_.candidates.front().model_score;
        for (const Candidate& c : record_.candidates) best = std::max(best, c.model_score);
        put(best);
        break;
      }
    }
  }
  for (const double v : out) {
    if (!std::isfinite(v)) {
      throw InputError(fmt::format("record '{}' produced a non-finite feature", record_.id));
    }
  }
}

FeatureVector build_features(const ExampleRecord& record, std::size_t candidate_index,
                             const FeatureConfig& config) {
  FeatureBuilder builder(record, config);
  FeatureVector fv;
  fv.values.resize(builder.dimension());
  builder.fill(candidate_index, fv.values);
  fv.config_fingerprint = config.fingerprint();
  fv.example_id = record.id;
  fv.candidate_index = candidate_index;
  return fv;
}

FeatureMatrix feature_matrix(std::span<const ExampleRecord> records,
                             const FeatureConfig& config, bool per_candidate,
                             LabelPolicy labels, std::size_t max_candidates) {
  config.validate();
  FeatureMatrix out;
  out.fingerprint = config.fingerprint();
  for (std::size_t r = 0; r < records.size(); ++r) {
    const std::size_t count =
        per_candidate ? std::min(records[r].candidates.size(), max_candidates) : 1;
    for (std::size_t c = 0; c < count; ++c) out.rows.push_back({r, c});
  }
  const std::size_t dim = config.dimension();
  out.values.resize(static_cast<Eigen::Index>(out.rows.size()), static_cast<Eigen::Index>(dim));

  std::vector<std::string> missing;
  if (labels == LabelPolicy::kRequire) out.labels.resize(out.rows.size());
  std::size_t row = 0;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const ExampleRecord& rec = records[r];
    FeatureBuilder builder(rec, config);
    bool reported = false;
    for (; row < out.rows.size() && out.rows[row].record_index == r; ++row) {
      const std::size_t c = out.rows[row].candidate_index;
      builder.fill(c, std::span<double>(out.values.row(static_cast<Eigen::Index>(row)).data(), dim));
      if (labels == LabelPolicy::kRequire) {
        const auto& flag = rec.candidates[c].is_correct;
        if (!flag) {
          if (!reported) missing.push_back(rec.id);
          reported = true;
        } else {
          out.labels[row] = *flag ? 1 : 0;
        }
      }
    }
  }
  if (!missing.empty()) {
    std::string ids;
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) {
      ids += (i ? ", " : "") + missing[i];
    }
    if (missing.size() > 20) ids += fmt::format(", ... ({} total)", missing.size());
    throw InputError("missing is_correct labels for records: " + ids);
  }
  return out;
}

}  // namespace calibqa
