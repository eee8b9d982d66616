// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <mutex>
#include <string>

#include "qgen/gateway.hpp"

namespace qgen {

/// Completions-style HTTP endpoint (OpenAI legacy /v1/completions shape, as
/// served by vLLM, llama.cpp server and similar).
///
/// Request fields: model, prompt, max_tokens, temperature, top_p, logprobs,
/// echo, stop, seed (+ top_k when set). Response: choices[0].text and
/// choices[0].logprobs.{tokens, token_logprobs, text_offset}.
struct HttpBackendConfig {
  std::string base_url = "http://127.0.0.1:8000";
  std::string path = "/v1/completions";
  std::string model;
  std::string api_key;
  int timeout_seconds = 60;
  /// When false, beam search requests fall back to best-of-n sampling.
  bool supports_beam_search = false;
  /// Text prepended to every scoring request (e.g. a BOS marker) so the
  /// first target token has a conditional log-probability.
  std::string document_start;
};

class HttpBackend : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig config);

  std::string name() const override { return "http"; }

  Completion complete(const std::string& prompt, const DecodingParams& params) const override;
  std::vector<double> next_token_logprobs(const std::string& prompt,
                                          std::span<const std::string> candidates) const override;
  std::vector<TokenLogprob> score_tokens(const std::string& prefix,
                                         const std::string& target) const override;

  const HttpBackendConfig& config() const { return config_; }

 private:
  Completion sample_once(const std::string& prompt, const DecodingParams& params,
                         bool beam) const;
  std::string post(const std::string& body) const;

  HttpBackendConfig config_;
  mutable std::once_flag beam_warning_;
};

}  // namespace qgen
