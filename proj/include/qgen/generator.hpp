// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file generator.hpp
 * @brief Expansive MCQ generation by incremental prompt completion.
 *
 * One question is built by extending a single prompt in five steps:
 *
 *   seeded            seeding statement embedding the learning objective
 *   stem-done         + MCQ directive, stem sampled (nucleus)
 *   choices-done      + "a)" ... anchors, one choice per call (beam search),
 *                       each conditioned on all previous choices
 *   answer-done       + "Answer:", most probable label (greedy), choice text
 *                       copied verbatim
 *   explanation-done  + "Explanation:", greedy, capped at 200 new tokens
 *
 * Every step's prompt is a strict extension of the previous one.
 */

#include <cstdint>
#include <string>
#include <vector>

#include "qgen/gateway.hpp"
#include "qgen/question_bank.hpp"
#include "qgen/templates.hpp"

namespace qgen {

enum class PromptStep { seeded, stem_done, choices_done, answer_done, explanation_done };

class PromptState {
 public:
  PromptState(std::string text, PromptStep step) : text_(std::move(text)), step_(step) {}

  const std::string& text() const { return text_; }
  PromptStep step() const { return step_; }

  /// Appends text within the current step.
  void append(std::string_view more) { text_ += more; }
  /// Appends and moves to the next step; throws on skipping or going back.
  void advance(std::string_view more, PromptStep next);

 private:
  std::string text_;
  PromptStep step_;
};

struct GeneratorConfig {
  std::size_t choices_k = 4;
  std::size_t batch_size = 20;
  int beam_width = 4;
  double stem_temperature = 1.0;
  double stem_top_p = 0.95;
  int stem_max_tokens = 64;
  int choice_max_tokens = 24;
  int explanation_max_tokens = 200;
  std::vector<std::string> explanation_stops{"\n\n"};
  /// Consecutive batches without a usable stem before giving up.
  int max_empty_batches = 3;

  void validate() const;
};

struct AnswerSelection {
  std::size_t index = 0;
  ChoiceDistribution distribution;
  bool tie = false;
};

struct Explanation {
  std::string text;
  bool truncated = false;
};

class Generator {
 public:
  Generator(const Gateway& gateway, TemplateSet templates, GeneratorConfig config = {});

  PromptState seed_prompt(const LearningObjective& lo) const;

  /// Seed statement + MCQ directive: the prompt every stem is sampled from.
  std::string stem_prompt(const LearningObjective& lo) const;

  /// Samples stems in batches until n are collected; returns exactly n.
  std::vector<std::string> generate_stems(const LearningObjective& lo, std::size_t n,
                                          std::uint64_t seed) const;

  /// Cuts a raw stem continuation at the first newline after the question
  /// mark and trims it. Text without a question mark is kept whole.
  static std::string extract_stem(std::string_view raw);

  /// Prompt state after the stem step.
  PromptState with_stem(const LearningObjective& lo, const std::string& stem) const;

  /// Generates k choices one at a time and advances `state` to choices-done.
  std::vector<std::string> generate_choices(PromptState& state, std::size_t k,
                                            std::uint64_t seed) const;

  /// Greedy label selection over a..k; appends the answer line.
  AnswerSelection select_answer(PromptState& state, const std::vector<std::string>& choices) const;

  Explanation generate_explanation(PromptState& state) const;

  /// Runs choices, answer and explanation for one stem.
  Question build_question(const LearningObjective& lo, const std::string& stem, std::string id,
                          std::uint64_t seed) const;

  /// n questions for one LO; stems are completed in parallel and ordered by
  /// stem index.
  std::vector<Question> generate_for_objective(const LearningObjective& lo, std::size_t n,
                                               std::uint64_t seed) const;

  /// All LOs in input order.
  std::vector<Question> generate(const std::vector<LearningObjective>& los, std::size_t per_lo,
                                 std::uint64_t seed) const;

  const GeneratorConfig& config() const { return config_; }
  const TemplateSet& templates() const { return templates_; }

 private:
  const Gateway& gateway_;
  TemplateSet templates_;
  GeneratorConfig config_;
};

/// "{lo id}-{index:04}" with a 1-based index.
std::string question_id(const std::string& lo_id, std::size_t index);

}  // namespace qgen
