#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace treegcn {

enum class ErrorKind {
  kShape,     // tensor or cloud dimensions disagree
  kContract,  // caller violated a documented precondition
  kNumeric,   // non-finite values, non-PSD matrices, diverged training
  kParse,     // malformed mesh text
  kFormat,    // malformed binary/ASCII cloud, checkpoint or CSV
  kGeometry,  // degenerate meshes or clouds
  kIo,        // filesystem failures
  kUsage,     // bad command-line usage
  kConfig,    // invalid run configuration
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Mesh parse failure; `line` is 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error(ErrorKind::kParse, "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace treegcn
