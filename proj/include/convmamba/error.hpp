#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace convmamba {

enum class ErrorKind {
  kDimension,
  kContract,
  kParameter,
  kData,
  kDegenerateInput,
  kParse,
  kFormat,
  kRange,
  kConfig,
  kIo,
  kMetrics,
  kSplit,
  kSampler,
  kNumeric,
  // Missing or invalid user input (command-line or config).
  kUsage,
};

const char* ErrorKindName(ErrorKind kind);

// Single exception type for the library. Parsers attach a byte offset or a
// line number so callers can point at the offending input.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);
  Error(ErrorKind kind, const std::string& message, std::size_t location,
        bool location_is_line);

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<std::size_t> byte_offset() const noexcept { return offset_; }
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  ErrorKind kind_;
  std::optional<std::size_t> offset_;
  std::optional<std::size_t> line_;
};

[[noreturn]] void Fail(ErrorKind kind, const std::string& message);
[[noreturn]] void FailAtOffset(ErrorKind kind, const std::string& message,
                               std::size_t offset);
[[noreturn]] void FailAtLine(ErrorKind kind, const std::string& message,
                             std::size_t line);

}  // namespace convmamba
