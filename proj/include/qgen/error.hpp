// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qgen {

/// Stable error codes. The string form (`to_string`) is what reports and the
/// CLI print, so existing names must not change.
enum class ErrorCode {
  precondition,
  backend_unreachable,
  backend_protocol_violation,
  label_not_tokenizable,
  cannot_echo_logprobs,
  tokenization_boundary_mismatch,
  anchor_not_produced,
  zero_usable_output,
  parse_error,
  duplicate_id,
  schema_version_mismatch,
  insufficient_questions,
  length_mismatch,
  unknown_label,
  ragged_counts,
  incomplete_table,
  io_error,
};

std::string_view to_string(ErrorCode code);

/// Errors a caller can act on by category: backend failures vs bad data.
enum class ErrorClass { usage, backend, data };

ErrorClass classify(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Parse failures keep the 1-based line number they occurred on (0 = unknown).
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& message)
      : Error(ErrorCode::parse_error,
              source + (line ? ":" + std::to_string(line) : std::string()) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace qgen
