#pragma once

#include <stdexcept>
#include <string>

namespace hoikit {

// Failure taxonomy. Callers catch these by type; the CLI maps ConfigError to
// exit code 2 and everything else to 3.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& m) : std::runtime_error("shape error: " + m) {}
};

struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& m) : std::runtime_error("domain error: " + m) {}
};

struct DegenerateRegionError : std::runtime_error {
  explicit DegenerateRegionError(const std::string& m)
      : std::runtime_error("degenerate region: " + m) {}
};

struct VocabularyError : std::runtime_error {
  explicit VocabularyError(const std::string& m) : std::runtime_error("vocabulary error: " + m) {}
};

struct LengthError : std::runtime_error {
  explicit LengthError(const std::string& m) : std::runtime_error("length error: " + m) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& m) : std::runtime_error("config error: " + m) {}
};

struct SimilarityError : std::runtime_error {
  explicit SimilarityError(const std::string& m) : std::runtime_error("similarity error: " + m) {}
};

// Runtime evaluation failures: malformed records, non-finite values, missing inputs.
struct EvalError : std::runtime_error {
  explicit EvalError(const std::string& m) : std::runtime_error("evaluation error: " + m) {}
};

}  // namespace hoikit
