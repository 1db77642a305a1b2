#include "calibqa/interchange.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <sstream>

#include "base64.h"
#include "calibqa/error.h"
#include "json.hpp"

namespace calibqa {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 10> kTopLevelKeys = {
    "version",    "id",         "task_kind", "question",   "context",
    "gold_answers", "candidates", "embeddings", "aux",      "split_tag"};

bool is_top_level_key(std::string_view key) {
  return std::find(kTopLevelKeys.begin(), kTopLevelKeys.end(), key) !=
         kTopLevelKeys.end();
}

bool all_finite(std::span<const float> values) {
  return std::all_of(values.begin(), values.end(),
                     [](float v) { return std::isfinite(v); });
}

// ---- JSON encoding ---------------------------------------------------------

json embedding_to_json(const Embedding& e) {
  return json{{"kind", e.kind == Embedding::Kind::kTokens ? "tokens" : "pooled"},
              {"n", e.rows},
              {"m", e.dim},
              {"data", internal::encode_floats(e.data)}};
}

json vector_to_json(const std::vector<float>& v) {
  return embedding_to_json(Embedding::Pooled(v));
}

json optional_embedding(const std::optional<Embedding>& e) {
  return e ? embedding_to_json(*e) : json(nullptr);
}

json candidate_to_json(const Candidate& c) {
  json out{{"text", c.text}, {"model_score", c.model_score}};
  if (c.start_logit) out["start_logit"] = *c.start_logit;
  if (c.end_logit) out["end_logit"] = *c.end_logit;
  if (c.passage_id) out["passage_id"] = *c.passage_id;
  if (c.passage_score) out["passage_score"] = *c.passage_score;
  if (c.log_likelihood) out["log_likelihood"] = *c.log_likelihood;
  if (c.span_embedding) out["span_embedding"] = vector_to_json(*c.span_embedding);
  if (c.is_correct) out["is_correct"] = *c.is_correct;
  return out;
}

json aux_to_json(const AuxSignals& a) {
  return json{{"top5_softmax", a.top5_softmax},
              {"dropout_mean_top5", a.dropout_mean_top5},
              {"dropout_var_top5", a.dropout_var_top5},
              {"context_length", a.context_length},
              {"prediction_length", a.prediction_length}};
}

// ---- JSON decoding ---------------------------------------------------------

// Decoding helper that reports which field failed.
class FieldReader {
 public:
  FieldReader(std::string record_id, std::size_t line, bool strict)
      : record_id_(std::move(record_id)), line_(line), strict_(strict) {}

  void set_record_id(std::string id) { record_id_ = std::move(id); }

  [[noreturn]] void fail(const std::string& field, const std::string& msg) const {
    throw ValidationError(record_id_, field, msg, line_);
  }

  const json& require(const json& obj, const char* key, const std::string& path) const {
    auto it = obj.find(key);
    if (it == obj.end()) fail(path + key, "missing required field");
    return *it;
  }

  std::string string_at(const json& v, const std::string& path) const {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
  }

  double number_at(const json& v, const std::string& path) const {
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
  }

  std::int64_t integer_at(const json& v, const std::string& path) const {
    if (!v.is_number_integer()) fail(path, "expected an integer");
    return v.get<std::int64_t>();
  }

  std::optional<double> optional_number(const json& obj, const char* key,
                                        const std::string& path) const {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    return number_at(*it, path + key);
  }

  void check_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                  const std::string& path) const {
    if (!strict_) return;
    for (const auto& item : obj.items()) {
      if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
        fail(path + item.key(), "unknown key");
      }
    }
  }

  Embedding embedding(const json& v, const std::string& path) const {
    if (!v.is_object()) fail(path, "expected an embedding object");
    check_keys(v, {"kind", "n", "m", "data"}, path + ".");
    Embedding e;
    const std::string kind = string_at(require(v, "kind", path + "."), path + ".kind");
    if (kind == "tokens") {
      e.kind = Embedding::Kind::kTokens;
    } else if (kind == "pooled") {
      e.kind = Embedding::Kind::kPooled;
    } else {
      fail(path + ".kind", "expected 'tokens' or 'pooled'");
    }
    e.rows = static_cast<int>(integer_at(require(v, "n", path + "."), path + ".n"));
    e.dim = static_cast<int>(integer_at(require(v, "m", path + "."), path + ".m"));
    try {
      e.data = internal::decode_floats(
          string_at(require(v, "data", path + "."), path + ".data"));
    } catch (const InputError& err) {
      fail(path + ".data", err.what());
    }
    return e;
  }

  std::optional<Embedding> optional_embedding(const json& obj, const char* key,
                                              const std::string& path) const {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    return embedding(*it, path + key);
  }

  std::array<double, 5> five(const json& v, const std::string& path) const {
    if (!v.is_array() || v.size() != 5) fail(path, "expected exactly 5 numbers");
    std::array<double, 5> out{};
    for (std::size_t i = 0; i < 5; ++i) out[i] = number_at(v[i], path);
    return out;
  }

  bool strict() const { return strict_; }

 private:
  std::string record_id_;
  std::size_t line_;
  bool strict_;
};

std::vector<float> pooled_vector(const FieldReader& r, const Embedding& e,
                                 const std::string& path) {
  if (e.rows != 1) r.fail(path, "expected a single pooled vector");
  return e.data;
}

Candidate candidate_from_json(const FieldReader& r, const json& v,
                              const std::string& path) {
  if (!v.is_object()) r.fail(path, "expected a candidate object");
  r.check_keys(v,
               {"text", "model_score", "start_logit", "end_logit", "passage_id",
                "passage_score", "log_likelihood", "span_embedding", "is_correct"},
               path + ".");
  Candidate c;
  c.text = r.string_at(r.require(v, "text", path + "."), path + ".text");
  c.model_score = r.number_at(r.require(v, "model_score", path + "."),
                              path + ".model_score");
  c.start_logit = r.optional_number(v, "start_logit", path + ".");
  c.end_logit = r.optional_number(v, "end_logit", path + ".");
  c.passage_score = r.optional_number(v, "passage_score", path + ".");
  c.log_likelihood = r.optional_number(v, "log_likelihood", path + ".");
  if (auto it = v.find("passage_id"); it != v.end() && !it->is_null()) {
    c.passage_id = r.integer_at(*it, path + ".passage_id");
  }
  if (auto e = r.optional_embedding(v, "span_embedding", path + ".")) {
    c.span_embedding = pooled_vector(r, *e, path + ".span_embedding");
  }
  if (auto it = v.find("is_correct"); it != v.end() && !it->is_null()) {
    if (!it->is_boolean()) r.fail(path + ".is_correct", "expected a boolean");
    c.is_correct = it->get<bool>();
  }
  return c;
}

void check_embedding(const Embedding& e, int hidden_dim, const std::string& id,
                     const std::string& field) {
  if (e.dim != hidden_dim) {
    throw ValidationError(id, field,
                          "dimension " + std::to_string(e.dim) +
                              " differs from hidden_dim " + std::to_string(hidden_dim));
  }
  if (e.rows < 1) throw ValidationError(id, field, "needs at least one row");
  if (e.kind == Embedding::Kind::kPooled && e.rows != 1) {
    throw ValidationError(id, field, "pooled embeddings have exactly one row");
  }
  if (e.data.size() != static_cast<std::size_t>(e.rows) * e.dim) {
    throw ValidationError(id, field, "payload size does not match n*m");
  }
  if (!all_finite(e.data)) throw ValidationError(id, field, "non-finite value");
}

void check_vector(const std::vector<float>& v, int hidden_dim, const std::string& id,
                  const std::string& field) {
  if (static_cast<int>(v.size()) != hidden_dim) {
    throw ValidationError(id, field,
                          "length " + std::to_string(v.size()) +
                              " differs from hidden_dim " + std::to_string(hidden_dim));
  }
  if (!all_finite(v)) throw ValidationError(id, field, "non-finite value");
}

std::string candidate_field(std::size_t index, const char* field) {
  return "candidates[" + std::to_string(index) + "]." + field;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::kReadingComprehension: return "reading_comprehension";
    case TaskKind::kOpenExtractive: return "open_extractive";
    case TaskKind::kOpenGenerative: return "open_generative";
  }
  return "?";
}

std::string_view to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::kTrain: return "train";
    case SplitTag::kDev: return "dev";
    case SplitTag::kTest: return "test";
  }
  return "?";
}

std::string_view to_string(EmMode mode) {
  return mode == EmMode::kSquad ? "squad" : "strict";
}

TaskKind parse_task_kind(std::string_view text) {
  if (text == "reading_comprehension") return TaskKind::kReadingComprehension;
  if (text == "open_extractive") return TaskKind::kOpenExtractive;
  if (text == "open_generative") return TaskKind::kOpenGenerative;
  throw InputError("unknown task_kind '" + std::string(text) + "'");
}

SplitTag parse_split_tag(std::string_view text) {
  if (text == "train") return SplitTag::kTrain;
  if (text == "dev") return SplitTag::kDev;
  if (text == "test") return SplitTag::kTest;
  throw InputError("unknown split_tag '" + std::string(text) + "'");
}

EmMode parse_em_mode(std::string_view text) {
  if (text == "squad") return EmMode::kSquad;
  if (text == "strict") return EmMode::kStrict;
  throw InputError("unknown EM mode '" + std::string(text) + "'");
}

Embedding Embedding::Tokens(int rows, int dim, std::vector<float> data) {
  return Embedding{Kind::kTokens, rows, dim, std::move(data)};
}

Embedding Embedding::Pooled(std::vector<float> values) {
  const int dim = static_cast<int>(values.size());
  return Embedding{Kind::kPooled, 1, dim, std::move(values)};
}

// ---------------------------------------------------------------------------
// Exact match

std::string normalize_answer(std::string_view text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (const char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (u < 0x80 && std::ispunct(u)) continue;
    cleaned.push_back(u < 0x80 ? static_cast<char>(std::tolower(u)) : ch);
  }
  std::istringstream words(cleaned);
  std::string word;
  std::string out;
  while (words >> word) {
    if (word == "a" || word == "an" || word == "the") continue;
    if (!out.empty()) out.push_back(' ');
    out += word;
  }
  return out;
}

bool exact_match(std::string_view prediction, std::span<const std::string> golds,
                 EmMode mode) {
  if (mode == EmMode::kStrict) {
    return std::any_of(golds.begin(), golds.end(),
                       [&](const std::string& g) { return g == prediction; });
  }
  const std::string normalized = normalize_answer(prediction);
  return std::any_of(golds.begin(), golds.end(), [&](const std::string& g) {
    return normalize_answer(g) == normalized;
  });
}

bool answer_is_correct(std::string_view prediction, std::span<const std::string> golds,
                       EmMode mode) {
  if (golds.empty()) {
    return mode == EmMode::kStrict ? prediction.empty()
                                   : normalize_answer(prediction).empty();
  }
  return exact_match(prediction, golds, mode);
}

// ---------------------------------------------------------------------------
// Validation

void validate_record(const ExampleRecord& r, EmMode em_mode) {
  const std::string& id = r.id;
  if (id.empty()) throw ValidationError(id, "id", "empty id");
  if (r.candidates.empty()) throw ValidationError(id, "candidates", "empty candidates");

  const bool generative = r.task_kind == TaskKind::kOpenGenerative;
  if (generative && r.context) {
    throw ValidationError(id, "context", "open_generative records carry no context");
  }
  if (!generative && !r.context) {
    throw ValidationError(id, "context", "context is required for this task_kind");
  }

  const int m = r.embeddings.hidden_dim;
  if (m <= 0) throw ValidationError(id, "embeddings.hidden_dim", "must be positive");
  check_embedding(r.embeddings.original, m, id, "embeddings.original");
  if (r.embeddings.question_bt) {
    check_embedding(*r.embeddings.question_bt, m, id, "embeddings.question_bt");
  }
  if (r.embeddings.context_bt) {
    check_embedding(*r.embeddings.context_bt, m, id, "embeddings.context_bt");
  }
  if (r.embeddings.cls) check_vector(*r.embeddings.cls, m, id, "embeddings.cls");

  std::map<std::int64_t, double> passage_scores;
  for (std::size_t i = 0; i < r.candidates.size(); ++i) {
    const Candidate& c = r.candidates[i];
    if (!std::isfinite(c.model_score)) {
      throw ValidationError(id, candidate_field(i, "model_score"), "non-finite score");
    }
    if (i > 0 && c.model_score > r.candidates[i - 1].model_score) {
      throw ValidationError(id, candidate_field(i, "model_score"),
                            "candidates must be ordered by descending model_score");
    }
    const auto need = [&](bool present, const char* field) {
      if (!present) {
        throw ValidationError(id, candidate_field(i, field),
                              "required for task_kind " + std::string(to_string(r.task_kind)));
      }
    };
    switch (r.task_kind) {
      case TaskKind::kOpenExtractive:
        need(c.passage_id.has_value(), "passage_id");
        need(c.passage_score.has_value(), "passage_score");
        [[fallthrough]];
      case TaskKind::kReadingComprehension:
        need(c.start_logit.has_value(), "start_logit");
        need(c.end_logit.has_value(), "end_logit");
        break;
      case TaskKind::kOpenGenerative:
        need(c.log_likelihood.has_value(), "log_likelihood");
        break;
    }
    for (const auto& [value, field] :
         {std::pair{c.start_logit, "start_logit"}, std::pair{c.end_logit, "end_logit"},
          std::pair{c.passage_score, "passage_score"},
          std::pair{c.log_likelihood, "log_likelihood"}}) {
      if (value && !std::isfinite(*value)) {
        throw ValidationError(id, candidate_field(i, field), "non-finite value");
      }
    }
    if (c.passage_id && c.passage_score) {
      auto [it, inserted] = passage_scores.emplace(*c.passage_id, *c.passage_score);
      if (!inserted && it->second != *c.passage_score) {
        throw ValidationError(id, candidate_field(i, "passage_score"),
                              "passage " + std::to_string(*c.passage_id) +
                                  " has inconsistent scores");
      }
    }
    if (c.span_embedding) {
      check_vector(*c.span_embedding, m, id, candidate_field(i, "span_embedding"));
    }
    if (c.is_correct &&
        *c.is_correct != answer_is_correct(c.text, r.gold_answers, em_mode)) {
      throw ValidationError(
          id, candidate_field(i, "is_correct"),
          "candidate " + std::to_string(i) + " is_correct=" +
              (*c.is_correct ? "true" : "false") +
              " disagrees with exact match against gold_answers");
    }
  }

  if (r.aux) {
    const AuxSignals& a = *r.aux;
    for (std::size_t k = 0; k < 5; ++k) {
      const double p = a.top5_softmax[k];
      if (!(p >= 0.0 && p <= 1.0)) {
        throw ValidationError(id, "aux.top5_softmax", "values must lie in [0,1]");
      }
      if (k > 0 && p > a.top5_softmax[k - 1]) {
        throw ValidationError(id, "aux.top5_softmax", "values must be nonincreasing");
      }
      if (!std::isfinite(a.dropout_mean_top5[k])) {
        throw ValidationError(id, "aux.dropout_mean_top5", "non-finite value");
      }
      if (!std::isfinite(a.dropout_var_top5[k])) {
        throw ValidationError(id, "aux.dropout_var_top5", "non-finite value");
      }
    }
    if (a.context_length < 0) {
      throw ValidationError(id, "aux.context_length", "must be nonnegative");
    }
    if (a.prediction_length < 0) {
      throw ValidationError(id, "aux.prediction_length", "must be nonnegative");
    }
  }
}

// ---------------------------------------------------------------------------
// Serialization

std::string record_to_line(const ExampleRecord& r) {
  json embeddings{{"original", embedding_to_json(r.embeddings.original)},
                  {"question_bt", optional_embedding(r.embeddings.question_bt)},
                  {"context_bt", optional_embedding(r.embeddings.context_bt)},
                  {"cls", r.embeddings.cls ? vector_to_json(*r.embeddings.cls)
                                           : json(nullptr)},
                  {"hidden_dim", r.embeddings.hidden_dim}};
  json candidates = json::array();
  for (const Candidate& c : r.candidates) candidates.push_back(candidate_to_json(c));

  json out{{"version", kRecordFormatVersion},
           {"id", r.id},
           {"task_kind", to_string(r.task_kind)},
           {"question", r.question},
           {"context", r.context ? json(*r.context) : json(nullptr)},
           {"gold_answers", r.gold_answers},
           {"candidates", std::move(candidates)},
           {"embeddings", std::move(embeddings)},
           {"aux", r.aux ? aux_to_json(*r.aux) : json(nullptr)},
           {"split_tag", r.split_tag ? json(to_string(*r.split_tag)) : json(nullptr)}};
  for (const auto& [key, value] : r.extra_fields) out[key] = json::parse(value);
  try {
    return out.dump();
  } catch (const json::exception& e) {
    throw InputError("record '" + r.id + "' cannot be serialized: " + e.what());
  }
}

ExampleRecord record_from_line(std::string_view line, const ReadOptions& options,
                               std::size_t line_number) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(line_number, std::string("malformed record: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError(line_number, "record is not a JSON object");

  FieldReader r("?", line_number, options.strict);
  ExampleRecord rec;
  rec.id = r.string_at(r.require(doc, "id", ""), "id");
  r.set_record_id(rec.id);

  const std::string version = r.string_at(r.require(doc, "version", ""), "version");
  if (version != kRecordFormatVersion) {
    r.fail("version", "unsupported version '" + version + "', expected '" +
                          std::string(kRecordFormatVersion) + "'");
  }
  for (const auto& item : doc.items()) {
    if (is_top_level_key(item.key())) continue;
    if (options.strict) r.fail(item.key(), "unknown key");
    rec.extra_fields.emplace(item.key(), item.value().dump());
  }

  try {
    rec.task_kind = parse_task_kind(r.string_at(r.require(doc, "task_kind", ""), "task_kind"));
  } catch (const ValidationError&) {
    throw;
  } catch (const InputError& e) {
    r.fail("task_kind", e.what());
  }
  rec.question = r.string_at(r.require(doc, "question", ""), "question");
  if (auto it = doc.find("context"); it != doc.end() && !it->is_null()) {
    rec.context = r.string_at(*it, "context");
  }
  const json& golds = r.require(doc, "gold_answers", "");
  if (!golds.is_array()) r.fail("gold_answers", "expected an array of strings");
  for (const json& g : golds) rec.gold_answers.push_back(r.string_at(g, "gold_answers"));

  const json& cands = r.require(doc, "candidates", "");
  if (!cands.is_array()) r.fail("candidates", "expected an array");
  for (std::size_t i = 0; i < cands.size(); ++i) {
    rec.candidates.push_back(
        candidate_from_json(r, cands[i], "candidates[" + std::to_string(i) + "]"));
  }

  const json& emb = r.require(doc, "embeddings", "");
  if (!emb.is_object()) r.fail("embeddings", "expected an object");
  r.check_keys(emb, {"original", "question_bt", "context_bt", "cls", "hidden_dim"},
               "embeddings.");
  rec.embeddings.hidden_dim = static_cast<int>(
      r.integer_at(r.require(emb, "hidden_dim", "embeddings."), "embeddings.hidden_dim"));
  rec.embeddings.original =
      r.embedding(r.require(emb, "original", "embeddings."), "embeddings.original");
  rec.embeddings.question_bt = r.optional_embedding(emb, "question_bt", "embeddings.");
  rec.embeddings.context_bt = r.optional_embedding(emb, "context_bt", "embeddings.");
  if (auto cls = r.optional_embedding(emb, "cls", "embeddings.")) {
    rec.embeddings.cls = pooled_vector(r, *cls, "embeddings.cls");
  }

  if (auto it = doc.find("aux"); it != doc.end() && !it->is_null()) {
    const json& a = *it;
    if (!a.is_object()) r.fail("aux", "expected an object");
    r.check_keys(a,
                 {"top5_softmax", "dropout_mean_top5", "dropout_var_top5",
                  "context_length", "prediction_length"},
                 "aux.");
    AuxSignals aux;
    aux.top5_softmax = r.five(r.require(a, "top5_softmax", "aux."), "aux.top5_softmax");
    aux.dropout_mean_top5 =
        r.five(r.require(a, "dropout_mean_top5", "aux."), "aux.dropout_mean_top5");
    aux.dropout_var_top5 =
        r.five(r.require(a, "dropout_var_top5", "aux."), "aux.dropout_var_top5");
    aux.context_length =
        r.integer_at(r.require(a, "context_length", "aux."), "aux.context_length");
    aux.prediction_length =
        r.integer_at(r.require(a, "prediction_length", "aux."), "aux.prediction_length");
    rec.aux = aux;
  }
  if (auto it = doc.find("split_tag"); it != doc.end() && !it->is_null()) {
    try {
      rec.split_tag = parse_split_tag(r.string_at(*it, "split_tag"));
    } catch (const ValidationError&) {
      throw;
    } catch (const InputError& e) {
      r.fail("split_tag", e.what());
    }
  }

  try {
    validate_record(rec, options.em_mode);
  } catch (const ValidationError& e) {
    if (line_number == 0) throw;
    // Re-raise with the line number attached.
    const std::string prefix = "record '" + e.record_id() + "' field '" + e.field() + "': ";
    std::string message = e.what();
    if (message.rfind(prefix, 0) == 0) message = message.substr(prefix.size());
    throw ValidationError(e.record_id(), e.field(), message, line_number);
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Reading / writing

RecordReader::RecordReader(const std::filesystem::path& path, ReadOptions options)
    : owned_(path), input_(&owned_), options_(options) {
  if (!owned_) throw InputError("cannot open record file: " + path.string());
}

RecordReader::RecordReader(std::istream& input, ReadOptions options)
    : input_(&input), options_(options) {}

std::optional<ExampleRecord> RecordReader::next() {
  std::string line;
  while (std::getline(*input_, line)) {
    ++line_number_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    ExampleRecord rec = record_from_line(line, options_, line_number_);
    if (!seen_ids_.insert(rec.id).second) {
      throw ValidationError(rec.id, "id", "duplicate record id", line_number_);
    }
    if (hidden_dim_ && *hidden_dim_ != rec.embeddings.hidden_dim) {
      throw DimensionError(rec.id, "embeddings.hidden_dim",
                           "hidden_dim " + std::to_string(rec.embeddings.hidden_dim) +
                               " differs from earlier records (" +
                               std::to_string(*hidden_dim_) + ")",
                           line_number_);
    }
    hidden_dim_ = rec.embeddings.hidden_dim;
    return rec;
  }
  return std::nullopt;
}

std::vector<ExampleRecord> read_records(const std::filesystem::path& path,
                                        const ReadOptions& options) {
  RecordReader reader(path, options);
  std::vector<ExampleRecord> out;
  while (auto rec = reader.next()) out.push_back(std::move(*rec));
  return out;
}

std::vector<ExampleRecord> read_records(std::istream& input, const ReadOptions& options) {
  RecordReader reader(input, options);
  std::vector<ExampleRecord> out;
  while (auto rec = reader.next()) out.push_back(std::move(*rec));
  return out;
}

void write_records(std::ostream& output, std::span<const ExampleRecord> records) {
  for (const ExampleRecord& r : records) output << record_to_line(r) << '\n';
}

void write_records(const std::filesystem::path& path,
                   std::span<const ExampleRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write record file: " + path.string());
  write_records(out, records);
}

// ---------------------------------------------------------------------------
// Splitting

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (const char ch : bytes) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RecordSplit split_records(std::vector<ExampleRecord> records,
                          const SplitFractions& fractions, std::uint64_t seed) {
  if (records.empty()) throw InputError("cannot split an empty record collection");
  const std::array<double, 3> f = {fractions.train, fractions.dev, fractions.test};
  for (const double v : f) {
    if (!(v >= 0.0)) throw InputError("split fractions must be nonnegative");
  }
  if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) {
    throw InputError("split fractions must sum to 1");
  }

  std::vector<std::pair<std::uint64_t, std::size_t>> keys(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    keys[i] = {mix_seed(seed, fnv1a64(records[i].id)), i};
  }
  std::sort(keys.begin(), keys.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return records[a.second].id < records[b.second].id;
  });

  const std::size_t n = records.size();
  std::array<std::size_t, 3> sizes{};
  std::size_t assigned = 0;
  for (int k = 0; k < 3; ++k) {
    // Guard against f*N landing just below an integer.
    sizes[k] = static_cast<std::size_t>(std::floor(f[k] * static_cast<double>(n) + 1e-9));
    assigned += sizes[k];
  }
  for (int k = 0; assigned < n; k = (k + 1) % 3) {
    if (f[k] > 0.0) {
      ++sizes[k];
      ++assigned;
    }
  }

  RecordSplit out;
  std::array<std::vector<ExampleRecord>*, 3> parts = {&out.train, &out.dev, &out.test};
  constexpr std::array<SplitTag, 3> tags = {SplitTag::kTrain, SplitTag::kDev,
                                            SplitTag::kTest};
  std::size_t cursor = 0;
  for (int k = 0; k < 3; ++k) {
    parts[k]->reserve(sizes[k]);
    for (std::size_t j = 0; j < sizes[k]; ++j, ++cursor) {
      ExampleRecord& rec = records[keys[cursor].second];
      rec.split_tag = tags[k];
      parts[k]->push_back(std::move(rec));
    }
  }
  return out;
}

}  // namespace calibqa
