// SPDX-License-Identifier: Apache-2.0
#include "qgen/error.hpp"

namespace qgen {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::precondition: return "precondition";
    case ErrorCode::backend_unreachable: return "backend-unreachable";
    case ErrorCode::backend_protocol_violation: return "backend-protocol-violation";
    case ErrorCode::label_not_tokenizable: return "label-not-tokenizable-as-single-step";
    case ErrorCode::cannot_echo_logprobs: return "backend-cannot-echo-prompt-logprobs";
    case ErrorCode::tokenization_boundary_mismatch: return "tokenization-boundary-mismatch";
    case ErrorCode::anchor_not_produced: return "anchor-not-produced";
    case ErrorCode::zero_usable_output: return "zero-usable-output";
    case ErrorCode::parse_error: return "parse-error";
    case ErrorCode::duplicate_id: return "duplicate-id";
    case ErrorCode::schema_version_mismatch: return "schema-version-mismatch";
    case ErrorCode::insufficient_questions: return "insufficient-questions";
    case ErrorCode::length_mismatch: return "length-mismatch";
    case ErrorCode::unknown_label: return "unknown-label";
    case ErrorCode::ragged_counts: return "ragged-counts";
    case ErrorCode::incomplete_table: return "incomplete-table";
    case ErrorCode::io_error: return "io-error";
  }
  return "unknown";
}

ErrorClass classify(ErrorCode code) {
  switch (code) {
    case ErrorCode::precondition:
      return ErrorClass::usage;
    case ErrorCode::backend_unreachable:
    case ErrorCode::backend_protocol_violation:
    case ErrorCode::label_not_tokenizable:
    case ErrorCode::cannot_echo_logprobs:
    case ErrorCode::tokenization_boundary_mismatch:
    case ErrorCode::anchor_not_produced:
    case ErrorCode::zero_usable_output:
      return ErrorClass::backend;
    default:
      return ErrorClass::data;
  }
}

}  // namespace qgen
