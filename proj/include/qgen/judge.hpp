// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file judge.hpp
 * @brief Balanced evaluation sets and two-turn scaffolded judging.
 *
 * Each item is judged in its own conversation:
 *
 *   User: <answer task with the MCQ, NOTA re-added as the last choice>
 *   Assistant: The answer to Q1 is **<label>**
 *   User: <does Q1 test this learning objective? Yes or No>
 *   Assistant: My answer is **
 *
 * The assistant prefix is left open so the next token is the judged label.
 * Turn 1 reads the label distribution over a..e; its argmax is written back
 * into the transcript before turn 2 reads the Yes/No distribution.
 */

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qgen/gateway.hpp"
#include "qgen/question_bank.hpp"
#include "qgen/templates.hpp"

namespace qgen::judge {

enum class Condition { control, treatment };
std::string_view to_string(Condition c);
Condition parse_condition(std::string_view s);

enum class Verdict { yes, no };
std::string_view to_string(Verdict v);
Verdict parse_verdict(std::string_view s);

struct EvalItem {
  std::string question_id;
  std::string origin_lo;
  std::string shown_lo;
  Condition condition = Condition::control;
  std::size_t presentation_order = 0;

  bool operator==(const EvalItem&) const = default;
};

struct EvalSet {
  std::uint64_t seed = 0;
  std::vector<std::string> lo_ids;  // selected LOs, bank order
  std::vector<EvalItem> items;      // grouped by LO: control items, then treatment

  bool operator==(const EvalSet&) const = default;
};

/// Picks n_los LOs with at least per_lo alignment-pass questions and per_lo
/// questions from each; half of every LO's questions are control, half
/// treatment with a shown LO drawn uniformly from the other selected LOs.
/// Throws insufficient_questions naming every LO that falls short.
EvalSet build_eval_set(const QuestionBank& bank, std::size_t n_los, std::size_t per_lo,
                       std::uint64_t seed);

/// Per-judge presentation order: order[p] = item index judged at position p.
std::vector<std::size_t> judge_order(const EvalSet& set, const std::string& judge_id);

/// Invariant check used by tests and the CLI; returns human-readable
/// violations (empty when the set is well formed).
std::vector<std::string> check_eval_set(const EvalSet& set, std::size_t n_los,
                                        std::size_t per_lo);

std::string serialize_eval_set(const EvalSet& set);
EvalSet parse_eval_set(std::string_view content, const std::string& source = "eval-set");
void write_eval_set(const EvalSet& set, const std::filesystem::path& path);
EvalSet read_eval_set(const std::filesystem::path& path);

struct JudgmentRecord {
  std::string judge_id;
  std::string question_id;
  std::string answer_label;
  std::optional<ChoiceDistribution> answer_distribution;
  Verdict alignment_verdict = Verdict::no;
  std::optional<double> p_yes;
  std::string shown_lo;
  std::optional<Condition> condition;
  /// "answer-tie", "verdict-tie".
  std::vector<std::string> flags;

  bool operator==(const JudgmentRecord&) const = default;
};

/// Choice labels as judged: original choices a.. and NOTA last.
std::vector<std::string> judged_labels(const Question& q);

/// Turn-1 user message.
std::string answer_message(const Question& q, const TemplateSet& templates);
/// Turn-2 user message.
std::string alignment_message(const LearningObjective& shown, const TemplateSet& templates);

struct Turn {
  std::string role_prefix;
  std::string text;
};

/// Turns joined by blank lines; the last turn is left unterminated.
std::string render_conversation(const std::vector<Turn>& turns);

struct AnswerFragment {
  std::string prompt;  // conversation up to the open answer prefix
  std::string label;
  ChoiceDistribution distribution;
  bool tie = false;
};

AnswerFragment judge_answer(const Gateway& gateway, const Question& q,
                            const TemplateSet& templates);

struct AlignmentFragment {
  std::string prompt;  // full two-turn conversation up to the open prefix
  Verdict verdict = Verdict::no;
  double p_yes = 0.0;
  bool tie = false;
};

/// Turn 2, continuing the conversation from judge_answer.
AlignmentFragment judge_alignment(const Gateway& gateway, const Question& q,
                                  const AnswerFragment& turn1, const LearningObjective& shown,
                                  const TemplateSet& templates);

JudgmentRecord judge_item(const Gateway& gateway, const std::string& judge_id,
                          const EvalItem& item, const QuestionBank& bank,
                          const TemplateSet& templates);

/// Judges every item (concurrently, one conversation each). Records come
/// back in this judge's presentation order.
std::vector<JudgmentRecord> run_judge(const Gateway& gateway, const std::string& judge_id,
                                      const EvalSet& set, const QuestionBank& bank,
                                      const TemplateSet& templates);

/// The generating pipeline as a judge: its stored answer, and "yes" exactly
/// when the shown LO is the LO its alignment check ranked first.
std::vector<JudgmentRecord> pipeline_judgments(const std::string& judge_id, const EvalSet& set,
                                               const QuestionBank& bank);

std::string serialize_records(const std::vector<JudgmentRecord>& records);
std::vector<JudgmentRecord> parse_records(std::string_view content,
                                          const std::string& source = "records");
void write_records(const std::vector<JudgmentRecord>& records, const std::filesystem::path& path);
std::vector<JudgmentRecord> read_records(const std::filesystem::path& path);

}  // namespace qgen::judge
