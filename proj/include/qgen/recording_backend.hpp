// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "qgen/gateway.hpp"

namespace qgen {

/// Decorator that records every prompt sent to the wrapped backend. Scoring
/// calls record prefix + target.
class RecordingBackend : public Backend {
 public:
  explicit RecordingBackend(std::shared_ptr<const Backend> inner) : inner_(std::move(inner)) {}

  std::string name() const override { return "recording(" + inner_->name() + ")"; }

  Completion complete(const std::string& prompt, const DecodingParams& params) const override {
    record(prompt);
    return inner_->complete(prompt, params);
  }

  std::vector<Completion> complete_n(const std::string& prompt, const DecodingParams& params,
                                     std::size_t n) const override {
    record(prompt);
    return inner_->complete_n(prompt, params, n);
  }

  std::vector<double> next_token_logprobs(const std::string& prompt,
                                          std::span<const std::string> candidates) const override {
    record(prompt);
    return inner_->next_token_logprobs(prompt, candidates);
  }

  std::vector<TokenLogprob> score_tokens(const std::string& prefix,
                                         const std::string& target) const override {
    record(prefix + target);
    return inner_->score_tokens(prefix, target);
  }

  std::vector<std::string> prompts() const {
    std::lock_guard lock(mutex_);
    return prompts_;
  }

  void clear() {
    std::lock_guard lock(mutex_);
    prompts_.clear();
  }

 private:
  void record(const std::string& prompt) const {
    std::lock_guard lock(mutex_);
    prompts_.push_back(prompt);
  }

  std::shared_ptr<const Backend> inner_;
  mutable std::mutex mutex_;
  mutable std::vector<std::string> prompts_;
};

}  // namespace qgen
