// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qgen/gateway.hpp"

namespace qgen {

inline constexpr std::string_view kBankSchema = "qgen-bank";
inline constexpr std::string_view kBankSchemaVersion = "1";
inline constexpr std::string_view kObjectivesSchemaVersion = "1";

enum class LoForm { action_based, content_based };

std::string_view to_string(LoForm form);
LoForm parse_lo_form(std::string_view s);

struct LearningObjective {
  std::string id;
  std::string text;
  LoForm form = LoForm::action_based;
  std::optional<std::string> unit;
  std::optional<std::string> topic;

  bool operator==(const LearningObjective&) const = default;
};

/// Pipeline order; `rejected` is terminal and reachable from any other stage.
enum class Stage { generated, syntactic_pass, confidence_pass, alignment_pass, rejected };

std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view s);
/// Position along the pipeline (rejected has no rank and returns -1).
int stage_rank(Stage stage);

/// Audit trail of one answer-confidence evaluation.
struct ConfidenceRecord {
  std::uint64_t seed = 0;
  /// permutation[p] = original choice index shown at presented position p.
  std::vector<std::size_t> permutation;
  ChoiceDistribution distribution;
  std::string top_label;
  double top_probability = 0.0;
  double threshold = 0.0;
  bool accepted = false;
  std::string reason;

  bool operator==(const ConfidenceRecord&) const = default;
};

struct LoScore {
  std::string lo;
  double score = 0.0;

  bool operator==(const LoScore&) const = default;
};

/// Audit trail of one alignment check: the question's relevance column.
struct AlignmentRecord {
  std::vector<LoScore> relevance;
  std::string best_lo;  // empty when the maximum is tied
  bool tie = false;
  bool aligned = false;

  bool operator==(const AlignmentRecord&) const = default;
};

struct Question {
  std::string id;
  std::string origin_lo;
  std::string stem;
  std::vector<std::string> choices;
  std::size_t answer_index = 0;
  std::string explanation;
  Stage stage = Stage::generated;
  std::vector<std::string> rejection_reasons;
  /// Stage the question held when it was rejected.
  std::optional<Stage> rejected_from;
  std::uint64_t generation_seed = 0;
  /// Non-fatal generation notes, e.g. "explanation-truncated", "answer-tie".
  std::vector<std::string> flags;
  std::optional<ConfidenceRecord> confidence;
  std::optional<AlignmentRecord> alignment;

  const std::string& answer_text() const { return choices.at(answer_index); }
  bool operator==(const Question&) const = default;
};

/// Moves q forward to `to`; throws precondition on a backwards or rejected
/// transition.
void advance(Question& q, Stage to);
/// Marks q rejected with at least one reason code.
void reject(Question& q, std::vector<std::string> reasons);

struct QuestionBank {
  std::vector<LearningObjective> objectives;
  std::vector<Question> questions;
  std::string pipeline_config_digest;

  const LearningObjective* find_objective(std::string_view id) const;
  /// Throws if an origin LO is missing or ids repeat.
  void validate() const;
  bool operator==(const QuestionBank&) const = default;
};

/// Reads a delimited LO file: tab-separated, or comma-separated when the
/// extension is .csv. Columns: id, form, text[, unit[, topic]]. Blank lines
/// and lines starting with '#' are skipped; a "#schema_version=N" line pins
/// the format version and an optional header row starting with "id" is
/// ignored.
std::vector<LearningObjective> load_objectives(const std::filesystem::path& path);
std::vector<LearningObjective> parse_objectives(std::string_view content, char delimiter,
                                                const std::string& source = "objectives");

/// Duplicate-detection key: whitespace- and case-insensitive over the stem
/// and the choices, choice order preserved.
std::string canonical_key(const Question& q);

std::string serialize_bank(const QuestionBank& bank);
QuestionBank parse_bank(std::string_view content, const std::string& source = "bank");

/// Writes atomically (temp file + rename).
void write_bank(const QuestionBank& bank, const std::filesystem::path& path);
QuestionBank read_bank(const std::filesystem::path& path);

/// Digest of the serialized bank.
std::string bank_digest(const QuestionBank& bank);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace qgen
