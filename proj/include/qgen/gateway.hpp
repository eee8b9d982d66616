// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file gateway.hpp
 * @brief Uniform access to a language model's generation and scoring.
 *
 * Three capabilities are used by the pipeline:
 *  - complete():           continue a prompt under a decoding strategy
 *  - label_distribution(): next-token distribution restricted to a label set
 *  - score_target():       total log-probability of a target after a prefix
 *
 * Backends implement the raw calls; Gateway adds validation, label-variant
 * aggregation and the restricted softmax. Backends must be safe for
 * concurrent const use.
 */

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qgen {

enum class DecodingMode { nucleus, beam, greedy };

struct DecodingParams {
  DecodingMode mode = DecodingMode::greedy;
  double temperature = 1.0;
  double top_p = 1.0;
  std::optional<int> top_k;
  std::optional<int> beam_width;
  /// Exponent on hypothesis length when ranking finished beams.
  double length_penalty = 1.0;
  int max_new_tokens = 64;
  std::vector<std::string> stop_sequences;
  std::uint64_t seed = 0;

  static DecodingParams greedy(int max_new_tokens);
  static DecodingParams nucleus(double temperature, double top_p, int max_new_tokens,
                                std::uint64_t seed);
  static DecodingParams beam(int width, int max_new_tokens);

  /// Throws Error(precondition) on out-of-range fields.
  void validate() const;
};

enum class FinishReason { stop_sequence, length, end_of_text };

struct TokenLogprob {
  std::string token;
  double logprob = 0.0;

  bool operator==(const TokenLogprob&) const = default;
};

struct Completion {
  std::string text;
  std::vector<TokenLogprob> tokens;
  FinishReason finish = FinishReason::end_of_text;

  /// max_new_tokens was reached before any stop sequence.
  bool truncated() const { return finish == FinishReason::length; }
  double total_logprob() const;

  bool operator==(const Completion&) const = default;
};

struct LabelScore {
  std::string label;
  double probability = 0.0;

  bool operator==(const LabelScore&) const = default;
};

/// Normalized probability per presented label, in presentation order.
using ChoiceDistribution = std::vector<LabelScore>;

class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::string name() const = 0;

  virtual Completion complete(const std::string& prompt, const DecodingParams& params) const = 0;

  /// n independent samples. The default derives one seed per sample from
  /// params.seed and calls complete().
  virtual std::vector<Completion> complete_n(const std::string& prompt,
                                             const DecodingParams& params,
                                             std::size_t n) const;

  /// log p(candidate | prompt) for each candidate. Every candidate must be a
  /// single token for this backend; otherwise label_not_tokenizable.
  virtual std::vector<double> next_token_logprobs(
      const std::string& prompt, std::span<const std::string> candidates) const = 0;

  /// Per-token log-probabilities of `target` as a continuation of `prefix`.
  /// Only target tokens are returned.
  virtual std::vector<TokenLogprob> score_tokens(const std::string& prefix,
                                                 const std::string& target) const = 0;
};

struct GatewayOptions {
  /// Surface forms whose probability mass is pooled per label; "{label}" is
  /// replaced by the label text.
  std::vector<std::string> label_variants{"{label}", " {label}"};
  std::size_t concurrency = 4;
};

class Gateway {
 public:
  explicit Gateway(std::shared_ptr<const Backend> backend, GatewayOptions options = {});

  Completion complete(const std::string& prompt, const DecodingParams& params) const;
  std::vector<Completion> complete_n(const std::string& prompt, const DecodingParams& params,
                                     std::size_t n) const;

  /// Softmax over the restricted label set, computed in log space from the
  /// pooled variant log-probabilities. Output order matches `labels`.
  ChoiceDistribution label_distribution(const std::string& prompt,
                                        const std::vector<std::string>& labels) const;

  double score_target(const std::string& prefix, const std::string& target) const;
  std::vector<TokenLogprob> score_tokens(const std::string& prefix,
                                         const std::string& target) const;

  std::size_t concurrency() const { return options_.concurrency; }
  const GatewayOptions& options() const { return options_; }
  const Backend& backend() const { return *backend_; }
  std::shared_ptr<const Backend> backend_ptr() const { return backend_; }

 private:
  std::shared_ptr<const Backend> backend_;
  GatewayOptions options_;
};

double log_sum_exp(std::span<const double> xs);
std::vector<double> softmax(std::span<const double> logits);

/// Index of the largest probability; ties resolve to the lowest index and set
/// *tie when provided.
std::size_t argmax(const ChoiceDistribution& dist, bool* tie = nullptr);

/// Cuts text at the earliest occurrence of any stop sequence (exclusive) and
/// trims the token list so the tokens still concatenate to the text. Returns
/// true if a stop sequence was found.
bool apply_stop_sequences(Completion& completion, const std::vector<std::string>& stops);

/// Keeps the first max_tokens tokens; marks finish=length if anything was cut.
void apply_token_limit(Completion& completion, int max_tokens);

}  // namespace qgen
