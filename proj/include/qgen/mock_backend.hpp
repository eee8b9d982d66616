// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file mock_backend.hpp
 * @brief Deterministic in-process language model for tests and dry runs.
 *
 * Two layers:
 *  1. Fixture rules loaded from a scenario file. A rule matches prompts by
 *     substring, suffix, prefix, exact text or regex and scripts either the
 *     continuation(s) or the next-token log-probabilities of named tokens.
 *  2. A fallback scorer that assigns every (context window, token) pair a
 *     stable pseudo-random log-probability, optionally boosted when the
 *     token's word already occurs in the context. Generation samples from
 *     the same scorer over a small built-in vocabulary plus the context's
 *     keywords.
 *
 * The backend holds no mutable state; all methods are safe to call
 * concurrently.
 */

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "qgen/gateway.hpp"

namespace qgen::mock {

/// Mock tokenization. A token is a lone "\n", or an optional run of spaces
/// and tabs followed by one alphanumeric run (non-ASCII bytes count as
/// alphanumeric) or one other character. Spaces at the very end or before a
/// newline form their own token. Tokens always concatenate back to the input.
std::vector<std::string> tokenize(std::string_view text);

/// Lowercased word of a token when it qualifies as a keyword (alphanumeric,
/// at least min_length bytes); empty otherwise.
std::string keyword_of(std::string_view token, int min_length);

struct ScoringConfig {
  enum class Base { hash, uniform };

  Base base = Base::hash;
  /// Base::uniform: every token scores -ln(uniform_vocab).
  int uniform_vocab = 4;
  /// Base::hash: log-probabilities fall in [-(0.05 + spread), -0.05).
  double spread = 8.0;
  /// Number of trailing context tokens that feed the hash.
  int window = 2;
  /// Added to a token's score when its keyword occurs earlier in the context.
  double keyword_boost = 0.0;
  int min_keyword_length = 4;
  /// Generation only: line breaks and end-of-text are penalized by
  /// end_penalty per token short of min_span.
  double end_penalty = 4.0;
  int min_span = 3;
  /// Generation vocabulary; empty selects the built-in list.
  std::vector<std::string> vocabulary;
};

enum class MatchMode { contains, prefix, suffix, exact, regex };

struct Rule {
  std::string pattern;
  MatchMode mode = MatchMode::contains;
  /// complete() returns completions[0]; complete_n cycles through the list.
  std::vector<std::string> completions;
  /// Scripted next-token log-probabilities; unlisted tokens get -inf.
  std::map<std::string, double> token_logprobs;

  bool matches(const std::string& prompt) const;

  std::optional<std::regex> compiled;
};

class MockBackend : public Backend {
 public:
  explicit MockBackend(ScoringConfig scoring = {}, std::vector<Rule> rules = {});

  /// Scenario JSON: {"schema_version": "1", "scoring": {...}, "rules": [...]}.
  static std::shared_ptr<MockBackend> from_scenario_text(std::string_view json_text);
  static std::shared_ptr<MockBackend> from_scenario_file(const std::filesystem::path& path);

  std::string name() const override { return "mock"; }

  Completion complete(const std::string& prompt, const DecodingParams& params) const override;
  std::vector<Completion> complete_n(const std::string& prompt, const DecodingParams& params,
                                     std::size_t n) const override;
  std::vector<double> next_token_logprobs(const std::string& prompt,
                                          std::span<const std::string> candidates) const override;
  std::vector<TokenLogprob> score_tokens(const std::string& prefix,
                                         const std::string& target) const override;

  /// Fallback score of `token` after `context` (tokens) whose keyword set is
  /// `keywords`. Exposed so tests can build independent oracles.
  double token_logprob(std::span<const std::string> context,
                       const std::unordered_set<std::string>& keywords,
                       const std::string& token) const;

  const ScoringConfig& scoring() const { return scoring_; }
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }

 private:
  const Rule* find_rule(const std::string& prompt, bool want_completion) const;
  Completion scripted(const std::string& text, const DecodingParams& params) const;

  ScoringConfig scoring_;
  std::vector<Rule> rules_;
  std::vector<std::string> vocabulary_;
};

/// Built-in generation vocabulary of the fallback model.
const std::vector<std::string>& builtin_vocabulary();

}  // namespace qgen::mock
