#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace sapling {

enum class ErrorKind {
  Parse,          // malformed input text/bytes
  Range,          // value outside its admissible domain
  Degenerate,     // geometry does not constrain the estimate
  FrameMismatch,  // frame tags disagree at an operation boundary
  NotFound,       // missing record, file or key
  Duplicate,      // key already present
  Solver,         // iterative solver failed to converge
  Io,             // filesystem failure
  Config,         // invalid configuration / parameters
};

const char* to_string(ErrorKind kind);

/// Structured error carried by every failing operation in the library.
/// `line` is 1-based and set by the text parsers.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message,
        std::optional<std::size_t> line = std::nullopt);

  ErrorKind kind() const { return kind_; }
  std::optional<std::size_t> line() const { return line_; }

 private:
  ErrorKind kind_;
  std::optional<std::size_t> line_;
};

}  // namespace sapling
