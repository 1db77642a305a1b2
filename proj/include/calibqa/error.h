#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace calibqa {

// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kInput = 2,
  kCompatibility = 3,
  kMetricUndefined = 4,
};

// Base of every error raised by the library. Each error knows which exit code
// the CLI reports for it.
class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ExitCode code() const { return code_; }

 private:
  ExitCode code_;
};

// Bad user input: unreadable files, malformed records, invalid arguments,
// training sets a learner cannot fit.
class InputError : public Error {
 public:
  explicit InputError(const std::string& message)
      : Error(ExitCode::kInput, message) {}
};

class ParseError : public InputError {
 public:
  ParseError(std::size_t line, const std::string& message)
      : InputError(line > 0 ? "line " + std::to_string(line) + ": " + message
                            : message),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// A record parsed but broke a schema invariant.
class ValidationError : public InputError {
 public:
  ValidationError(const std::string& record_id, const std::string& field,
                  const std::string& message, std::size_t line = 0)
      : InputError(Format(record_id, field, message, line)),
        record_id_(record_id),
        field_(field),
        line_(line) {}

  const std::string& record_id() const { return record_id_; }
  const std::string& field() const { return field_; }
  std::size_t line() const { return line_; }

 private:
  static std::string Format(const std::string& record_id,
                            const std::string& field,
                            const std::string& message, std::size_t line) {
    std::string out;
    if (line > 0) out += "line " + std::to_string(line) + ": ";
    out += "record '" + record_id + "' field '" + field + "': " + message;
    return out;
  }

  std::string record_id_;
  std::string field_;
  std::size_t line_;
};

// Hidden dimensions disagree across records of one file.
class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A feature part needs a record source that is absent.
class MissingFeatureError : public InputError {
 public:
  MissingFeatureError(const std::string& part, const std::string& record_id)
      : InputError("feature part '" + part + "' needs data missing from record '" +
                   record_id + "'"),
        part_(part) {}

  const std::string& part() const { return part_; }

 private:
  std::string part_;
};

// Artifacts that cannot be combined: model/feature fingerprint mismatch,
// unsupported file versions.
class CompatibilityError : public Error {
 public:
  explicit CompatibilityError(const std::string& message)
      : Error(ExitCode::kCompatibility, message) {}
};

// A metric is undefined on the given data (e.g. AUROC with one class).
class MetricUndefinedError : public Error {
 public:
  explicit MetricUndefinedError(const std::string& message)
      : Error(ExitCode::kMetricUndefined, message) {}
};

}  // namespace calibqa
