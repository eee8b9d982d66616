// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "qgen/question_bank.hpp"

namespace qgen::screening {

// Stable reason codes, written into bank files and reports.
inline constexpr std::string_view kDupQuestion = "dup-question";
inline constexpr std::string_view kStemTooShort = "stem-too-short";
inline constexpr std::string_view kChoiceEmpty = "choice-empty";
inline constexpr std::string_view kChoiceDuplicate = "choice-duplicate";
inline constexpr std::string_view kChoiceTooShort = "choice-too-short";
inline constexpr std::string_view kChoiceAotaNota = "choice-flawed-aota-nota";
inline constexpr std::string_view kChoiceDichotomous = "choice-dichotomous";
inline constexpr std::string_view kChoiceBothNeither = "choice-both-neither";
inline constexpr std::string_view kExplanationTooShort = "explanation-too-short";

/// All codes in report order.
const std::vector<std::string_view>& reason_codes();

struct Thresholds {
  std::size_t min_stem_chars = 10;
  std::size_t min_choice_chars = 5;
  std::size_t min_explanation_chars = 10;
};

struct ScreenVerdict {
  bool passed = true;
  std::vector<std::string> reasons;
};

/// Applies every exclusion rule and reports all violations. Lengths are
/// Unicode scalar counts of whitespace-normalized text.
ScreenVerdict screen(const Question& q, const Thresholds& limits = {});

struct FilterResult {
  std::vector<Question> retained;
  std::vector<Question> rejected;
};

/// De-duplicates by canonical_key (first occurrence wins; later copies are
/// rejected as dup-question without further screening), then screens the
/// rest. Retained questions move to syntactic-pass. Input questions must be
/// at generated or syntactic-pass.
FilterResult filter_bank(std::vector<Question> questions, const Thresholds& limits = {});

}  // namespace qgen::screening
