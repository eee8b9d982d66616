// SPDX-License-Identifier: Apache-2.0
#include "qgen/syntactic_filter.hpp"

#include <array>
#include <set>
#include <unordered_set>

#include "qgen/error.hpp"
#include "qgen/text.hpp"

namespace qgen::screening {
namespace {

std::string strip_trailing_punct(std::string s) {
  while (!s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == ',')) s.pop_back();
  return s;
}

bool is_dichotomous(const std::string& canonical) {
  static const std::array<std::string_view, 4> words{"yes", "no", "true", "false"};
  const auto bare = strip_trailing_punct(canonical);
  for (auto w : words) {
    if (bare == w) return true;
  }
  return false;
}

bool is_aota_nota(const std::string& canonical) {
  return canonical.find("all of the above") != std::string::npos ||
         canonical.find("none of the above") != std::string::npos;
}

bool starts_both_neither(const std::string& canonical) {
  const auto word = strip_trailing_punct(std::string(text::first_word(canonical)));
  return word == "both" || word == "neither";
}

}  // namespace

const std::vector<std::string_view>& reason_codes() {
  static const std::vector<std::string_view> codes{
      kDupQuestion,    kStemTooShort,      kChoiceEmpty,        kChoiceDuplicate,
      kChoiceTooShort, kChoiceAotaNota,    kChoiceDichotomous,  kChoiceBothNeither,
      kExplanationTooShort};
  return codes;
}

ScreenVerdict screen(const Question& q, const Thresholds& limits) {
  std::set<std::string_view> hit;

  if (text::scalar_count(text::normalize_space(q.stem)) < limits.min_stem_chars) {
    hit.insert(kStemTooShort);
  }

  std::unordered_set<std::string> seen;
  for (const auto& choice : q.choices) {
    const std::string canonical = text::canonicalize(choice);
    if (canonical.empty()) {
      hit.insert(kChoiceEmpty);
      continue;
    }
    if (!seen.insert(canonical).second) hit.insert(kChoiceDuplicate);
    if (text::scalar_count(canonical) < limits.min_choice_chars) hit.insert(kChoiceTooShort);
    if (is_aota_nota(canonical)) hit.insert(kChoiceAotaNota);
    if (is_dichotomous(canonical)) hit.insert(kChoiceDichotomous);
    if (starts_both_neither(canonical)) hit.insert(kChoiceBothNeither);
  }

  if (text::scalar_count(text::normalize_space(q.explanation)) < limits.min_explanation_chars) {
    hit.insert(kExplanationTooShort);
  }

  ScreenVerdict v;
  for (auto code : reason_codes()) {
    if (hit.count(code)) v.reasons.emplace_back(code);
  }
  v.passed = v.reasons.empty();
  return v;
}

FilterResult filter_bank(std::vector<Question> questions, const Thresholds& limits) {
  FilterResult out;
  std::unordered_set<std::string> keys;
  for (auto& q : questions) {
    if (q.stage != Stage::generated && q.stage != Stage::syntactic_pass) {
      throw Error(ErrorCode::precondition,
                  "question " + q.id + " is past syntactic filtering (" +
                      std::string(to_string(q.stage)) + ")");
    }
    if (!keys.insert(canonical_key(q)).second) {
      reject(q, {std::string(kDupQuestion)});
      out.rejected.push_back(std::move(q));
      continue;
    }
    auto verdict = screen(q, limits);
    if (verdict.passed) {
      if (q.stage == Stage::generated) advance(q, Stage::syntactic_pass);
      out.retained.push_back(std::move(q));
    } else {
      reject(q, std::move(verdict.reasons));
      out.rejected.push_back(std::move(q));
    }
  }
  return out;
}

}  // namespace qgen::screening
