// SPDX-License-Identifier: Apache-2.0
#include "qgen/http_backend.hpp"

#include <limits>

#include <spdlog/spdlog.h>

#include "httplib.h"
#include "json.hpp"
#include "qgen/error.hpp"
#include "qgen/seeding.hpp"

namespace qgen {
namespace {

using json = nlohmann::json;

const json& first_choice(const json& response) {
  if (!response.contains("choices") || !response["choices"].is_array() ||
      response["choices"].empty()) {
    throw Error(ErrorCode::backend_protocol_violation, "response has no choices");
  }
  return response["choices"][0];
}

const json& logprobs_block(const json& choice) {
  if (!choice.contains("logprobs") || !choice["logprobs"].is_object()) {
    throw Error(ErrorCode::backend_protocol_violation, "response is missing token logprobs");
  }
  return choice["logprobs"];
}

}  // namespace

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {}

std::string HttpBackend::post(const std::string& body) const {
  httplib::Client client(config_.base_url);
  client.set_connection_timeout(config_.timeout_seconds);
  client.set_read_timeout(config_.timeout_seconds);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  auto res = client.Post(config_.path, headers, body, "application/json");
  if (!res) {
    throw Error(ErrorCode::backend_unreachable,
                config_.base_url + ": " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::backend_protocol_violation,
                "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 300));
  }
  return res->body;
}

Completion HttpBackend::sample_once(const std::string& prompt, const DecodingParams& params,
                                    bool beam) const {
  json req = {
      {"model", config_.model},
      {"prompt", prompt},
      {"max_tokens", params.max_new_tokens},
      {"temperature", params.mode == DecodingMode::greedy ? 0.0 : params.temperature},
      {"top_p", params.top_p},
      {"logprobs", 1},
      {"echo", false},
      {"stop", params.stop_sequences},
      {"seed", params.seed},
  };
  if (params.mode == DecodingMode::greedy) {
    req["top_k"] = 1;
  } else if (params.top_k) {
    req["top_k"] = *params.top_k;
  }
  if (beam) {
    req["use_beam_search"] = true;
    req["best_of"] = params.beam_width.value_or(1);
    req["temperature"] = 0.0;
  }

  json res;
  try {
    res = json::parse(post(req.dump()));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::backend_protocol_violation, std::string("invalid JSON: ") + e.what());
  }
  const json& choice = first_choice(res);
  const json& lp = logprobs_block(choice);
  if (!lp.contains("tokens") || !lp.contains("token_logprobs")) {
    throw Error(ErrorCode::backend_protocol_violation, "response is missing token logprobs");
  }

  Completion c;
  c.text = choice.value("text", std::string());
  const auto& tokens = lp["tokens"];
  const auto& values = lp["token_logprobs"];
  if (tokens.size() != values.size()) {
    throw Error(ErrorCode::backend_protocol_violation, "tokens and token_logprobs differ in length");
  }
  std::string joined;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (values[i].is_null()) {
      throw Error(ErrorCode::backend_protocol_violation, "null logprob for a generated token");
    }
    c.tokens.push_back({tokens[i].get<std::string>(), values[i].get<double>()});
    joined += c.tokens.back().token;
  }

  const std::string finish = choice.value("finish_reason", std::string("stop"));
  if (finish == "length") {
    c.finish = FinishReason::length;
  } else if (choice.contains("stop_reason") && !choice["stop_reason"].is_string()) {
    // vLLM reports the matched stop string, or null / a token id for EOS.
    c.finish = FinishReason::end_of_text;
  } else {
    c.finish = FinishReason::stop_sequence;
  }

  if (joined != c.text) {
    // Some servers include the matched stop text in the token list.
    Completion trimmed = c;
    trimmed.text = joined;
    if (joined.rfind(c.text, 0) == 0 && apply_stop_sequences(trimmed, params.stop_sequences) &&
        trimmed.text == c.text) {
      trimmed.finish = c.finish;
      return trimmed;
    }
    throw Error(ErrorCode::backend_protocol_violation, "token strings do not concatenate to text");
  }
  return c;
}

Completion HttpBackend::complete(const std::string& prompt, const DecodingParams& params) const {
  if (params.mode != DecodingMode::beam) return sample_once(prompt, params, false);
  if (config_.supports_beam_search) return sample_once(prompt, params, true);

  std::call_once(beam_warning_, [&] {
    spdlog::warn("backend {} has no beam search; using best-of-{} sampling instead",
                 config_.base_url, params.beam_width.value_or(1));
  });
  DecodingParams sampling = params;
  sampling.mode = DecodingMode::nucleus;
  if (sampling.temperature == 0.0) sampling.temperature = 1.0;
  const int n = params.beam_width.value_or(1);
  Completion best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    sampling.seed = derive_seed(params.seed, "best-of", static_cast<std::uint64_t>(i));
    Completion c = sample_once(prompt, sampling, false);
    if (const double s = c.total_logprob(); s > best_score) {
      best_score = s;
      best = std::move(c);
    }
  }
  return best;
}

std::vector<TokenLogprob> HttpBackend::score_tokens(const std::string& prefix,
                                                    const std::string& target) const {
  const std::string prompt = config_.document_start + prefix + target;
  const std::size_t boundary = config_.document_start.size() + prefix.size();
  const std::size_t end = prompt.size();

  json req = {{"model", config_.model}, {"prompt", prompt}, {"max_tokens", 1},
              {"temperature", 0.0},     {"logprobs", 0},    {"echo", true}};
  json res;
  try {
    res = json::parse(post(req.dump()));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::backend_protocol_violation, std::string("invalid JSON: ") + e.what());
  }
  const json& lp = logprobs_block(first_choice(res));
  if (!lp.contains("text_offset") || !lp.contains("tokens") || !lp.contains("token_logprobs")) {
    throw Error(ErrorCode::cannot_echo_logprobs, "response lacks echoed prompt offsets");
  }
  const auto& tokens = lp["tokens"];
  const auto& values = lp["token_logprobs"];
  const auto& offsets = lp["text_offset"];
  if (tokens.size() != values.size() || tokens.size() != offsets.size()) {
    throw Error(ErrorCode::backend_protocol_violation, "echo arrays differ in length");
  }

  std::vector<TokenLogprob> out;
  bool aligned = false;
  std::string joined;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto off = offsets[i].get<std::size_t>();
    if (off < boundary || off >= end) continue;
    if (off == boundary) aligned = true;
    if (values[i].is_null()) {
      throw Error(ErrorCode::cannot_echo_logprobs, "no log-probability for an echoed target token");
    }
    out.push_back({tokens[i].get<std::string>(), values[i].get<double>()});
    joined += out.back().token;
  }
  if (!aligned || joined != target) {
    throw Error(ErrorCode::tokenization_boundary_mismatch,
                "target does not start on a token boundary after the prefix");
  }
  return out;
}

std::vector<double> HttpBackend::next_token_logprobs(
    const std::string& prompt, std::span<const std::string> candidates) const {
  std::vector<double> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) {
    std::vector<TokenLogprob> scored;
    try {
      scored = score_tokens(prompt, c);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::tokenization_boundary_mismatch) throw;
      throw Error(ErrorCode::label_not_tokenizable, "'" + c + "' does not start a token here");
    }
    if (scored.size() != 1) {
      throw Error(ErrorCode::label_not_tokenizable, "'" + c + "' spans several tokens");
    }
    out.push_back(scored.front().logprob);
  }
  return out;
}

}  // namespace qgen
