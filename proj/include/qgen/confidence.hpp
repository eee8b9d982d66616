// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file confidence.hpp
 * @brief Answer-confidence validation.
 *
 * Each question's original choices are shuffled with a per-question seed,
 * "none of the above" (NOTA) is appended as the last label, and the model's
 * next-token distribution over the labels is read off an answer prompt. A
 * question is accepted iff the most probable label is not NOTA and its
 * probability is strictly greater than the threshold.
 *
 * Presentation order is transient: the stored question keeps its original
 * choice order and answer_index.
 */

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qgen/gateway.hpp"
#include "qgen/question_bank.hpp"
#include "qgen/templates.hpp"

namespace qgen::confidence {

inline constexpr std::string_view kAccepted = "accepted";
inline constexpr std::string_view kLowConfidence = "low-confidence";
inline constexpr std::string_view kNotaArgmax = "nota-argmax";

struct PresentedQuestion {
  std::string question_id;
  std::string stem;
  /// (label, text), re-lettered positionally; NOTA is the last entry.
  std::vector<std::pair<std::string, std::string>> presented_choices;
  /// index_map[p] = original index of presented position p (NOTA excluded).
  std::vector<std::size_t> index_map;
  std::size_t nota_position = 0;

  std::vector<std::string> labels() const;
  const std::string& nota_label() const { return presented_choices.at(nota_position).first; }
};

struct ConfidenceDecision {
  std::string question_id;
  ChoiceDistribution distribution;
  std::string top_label;
  double top_probability = 0.0;
  double threshold = 0.0;
  bool accepted = false;
  std::string reason;
  std::uint64_t seed = 0;
  std::vector<std::size_t> permutation;
};

PresentedQuestion present(const Question& q, std::uint64_t seed,
                          const std::string& nota_text = "None of the above");

/// Renders the answer prompt for a presented question.
std::string answer_prompt(const PresentedQuestion& pq, const TemplateSet& templates);

ChoiceDistribution confidence(const Gateway& gateway, const PresentedQuestion& pq,
                              const TemplateSet& templates);

/// Pure decision rule on a distribution whose last label is NOTA.
ConfidenceDecision decide_from(const ChoiceDistribution& dist, const std::string& nota_label,
                               double threshold);

ConfidenceDecision decide(const Gateway& gateway, const Question& q, double threshold,
                          std::uint64_t seed, const TemplateSet& templates);

/// Per-question seed under a stage seed.
std::uint64_t question_seed(std::uint64_t stage_seed, const std::string& question_id);

/// Evaluates every question (in parallel), records the decision on each, and
/// advances accepted ones to confidence-pass; others are rejected with the
/// decision reason. Questions must be at syntactic-pass.
std::vector<ConfidenceDecision> validate(const Gateway& gateway, std::vector<Question>& questions,
                                         double threshold, std::uint64_t stage_seed,
                                         const TemplateSet& templates);

ConfidenceRecord to_record(const ConfidenceDecision& d);

}  // namespace qgen::confidence
