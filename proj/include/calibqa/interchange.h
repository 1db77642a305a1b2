#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace calibqa {

inline constexpr std::string_view kRecordFormatVersion = "cqa-v1";

enum class TaskKind { kReadingComprehension, kOpenExtractive, kOpenGenerative };
enum class SplitTag { kTrain, kDev, kTest };

// kSquad lowercases and strips punctuation, articles and extra whitespace
// before comparing; kStrict compares bytes.
enum class EmMode { kSquad, kStrict };

std::string_view to_string(TaskKind kind);
std::string_view to_string(SplitTag tag);
std::string_view to_string(EmMode mode);
TaskKind parse_task_kind(std::string_view text);
SplitTag parse_split_tag(std::string_view text);
EmMode parse_em_mode(std::string_view text);

// Either a token matrix (rows = tokens) or an already pooled vector
// (rows == 1). Stored row-major as float32, the on-disk precision.
struct Embedding {
  enum class Kind { kTokens, kPooled };

  Kind kind = Kind::kPooled;
  int rows = 0;
  int dim = 0;
  std::vector<float> data;

  static Embedding Tokens(int rows, int dim, std::vector<float> data);
  static Embedding Pooled(std::vector<float> values);

  std::span<const float> row(int r) const {
    return {data.data() + static_cast<std::size_t>(r) * dim,
            static_cast<std::size_t>(dim)};
  }

  bool operator==(const Embedding&) const = default;
};

struct EmbeddingBundle {
  Embedding original;
  // Encodes (q', c): the back-translated question with the original context.
  std::optional<Embedding> question_bt;
  // Encodes (q, c'): the original question with the back-translated context.
  std::optional<Embedding> context_bt;
  // [CLS] vector from a task-agnostic encoder.
  std::optional<std::vector<float>> cls;
  int hidden_dim = 0;

  bool operator==(const EmbeddingBundle&) const = default;
};

struct Candidate {
  std::string text;
  // Span models: start + end logit. Generative models: total log-likelihood.
  double model_score = 0.0;
  std::optional<double> start_logit;
  std::optional<double> end_logit;
  std::optional<std::int64_t> passage_id;
  std::optional<double> passage_score;
  std::optional<double> log_likelihood;
  // Mean of the span's start and end token representations.
  std::optional<std::vector<float>> span_embedding;
  std::optional<bool> is_correct;

  bool operator==(const Candidate&) const = default;
};

// Model-side summaries: top-5 softmax, and the top-5 of the mean and the
// variance of the K dropout-mask distributions.
struct AuxSignals {
  std::array<double, 5> top5_softmax{};
  std::array<double, 5> dropout_mean_top5{};
  std::array<double, 5> dropout_var_top5{};
  std::int64_t context_length = 0;
  std::int64_t prediction_length = 0;

  bool operator==(const AuxSignals&) const = default;
};

struct ExampleRecord {
  std::string id;
  TaskKind task_kind = TaskKind::kReadingComprehension;
  std::string question;
  std::optional<std::string> context;
  std::vector<std::string> gold_answers;
  std::vector<Candidate> candidates;
  EmbeddingBundle embeddings;
  std::optional<AuxSignals> aux;
  std::optional<SplitTag> split_tag;
  // Unknown top-level keys kept verbatim (key -> serialized JSON value).
  std::map<std::string, std::string> extra_fields;

  bool operator==(const ExampleRecord&) const = default;
};

// ---------------------------------------------------------------------------
// Exact match.

std::string normalize_answer(std::string_view text);

// True iff `prediction` matches any gold answer. No gold answers -> false.
bool exact_match(std::string_view prediction,
                 std::span<const std::string> golds,
                 EmMode mode = EmMode::kSquad);

// Correctness of a predicted answer under the dataset convention: with no
// gold answers (unanswerable) the prediction is correct iff it is empty.
bool answer_is_correct(std::string_view prediction,
                       std::span<const std::string> golds,
                       EmMode mode = EmMode::kSquad);

// ---------------------------------------------------------------------------
// Validation and (de)serialization.

struct ReadOptions {
  bool strict = false;
  EmMode em_mode = EmMode::kSquad;
};

// Throws ValidationError naming the offending field.
void validate_record(const ExampleRecord& record,
                     EmMode em_mode = EmMode::kSquad);

// Canonical single-line encoding (no trailing newline).
std::string record_to_line(const ExampleRecord& record);

// Parses and validates one line. Errors carry `line_number` when nonzero.
ExampleRecord record_from_line(std::string_view line,
                               const ReadOptions& options = {},
                               std::size_t line_number = 0);

// Streaming reader. Records come back in file order; blank lines are
// skipped. Checks id uniqueness and one hidden dimension per file.
class RecordReader {
 public:
  RecordReader(const std::filesystem::path& path, ReadOptions options = {});
  RecordReader(std::istream& input, ReadOptions options = {});

  std::optional<ExampleRecord> next();
  std::size_t line_number() const { return line_number_; }

 private:
  std::ifstream owned_;
  std::istream* input_;
  ReadOptions options_;
  std::size_t line_number_ = 0;
  std::optional<int> hidden_dim_;
  std::unordered_set<std::string> seen_ids_;
};

std::vector<ExampleRecord> read_records(const std::filesystem::path& path,
                                        const ReadOptions& options = {});
std::vector<ExampleRecord> read_records(std::istream& input,
                                        const ReadOptions& options = {});

void write_records(std::ostream& output, std::span<const ExampleRecord> records);
void write_records(const std::filesystem::path& path,
                   std::span<const ExampleRecord> records);

// ---------------------------------------------------------------------------
// Splitting.

struct SplitFractions {
  double train = 0.4;
  double dev = 0.1;
  double test = 0.5;
};

struct RecordSplit {
  std::vector<ExampleRecord> train;
  std::vector<ExampleRecord> dev;
  std::vector<ExampleRecord> test;
};

// Orders records by a seeded hash of their id, so the partition does not
// depend on storage order, then cuts floor(f * N) records per part and hands
// the remainder out train -> dev -> test. Stamps split_tag.
RecordSplit split_records(std::vector<ExampleRecord> records,
                          const SplitFractions& fractions, std::uint64_t seed);

// 64-bit FNV-1a, used for shuffle keys and config fingerprints.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

// Finalizer from splitmix64; mixes seeds with indices.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace calibqa
