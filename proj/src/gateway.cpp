// SPDX-License-Identifier: Apache-2.0
#include "qgen/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "qgen/error.hpp"
#include "qgen/seeding.hpp"

namespace qgen {

DecodingParams DecodingParams::greedy(int max_new_tokens) {
  DecodingParams p;
  p.mode = DecodingMode::greedy;
  p.top_k = 1;
  p.temperature = 0.0;
  p.max_new_tokens = max_new_tokens;
  return p;
}

DecodingParams DecodingParams::nucleus(double temperature, double top_p, int max_new_tokens,
                                       std::uint64_t seed) {
  DecodingParams p;
  p.mode = DecodingMode::nucleus;
  p.temperature = temperature;
  p.top_p = top_p;
  p.max_new_tokens = max_new_tokens;
  p.seed = seed;
  return p;
}

DecodingParams DecodingParams::beam(int width, int max_new_tokens) {
  DecodingParams p;
  p.mode = DecodingMode::beam;
  p.beam_width = width;
  p.temperature = 0.0;
  p.max_new_tokens = max_new_tokens;
  return p;
}

void DecodingParams::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::precondition, msg); };
  if (max_new_tokens <= 0) fail("max_new_tokens must be > 0");
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) fail("temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) fail("top_p must be in (0, 1]");
  if (top_k && *top_k <= 0) fail("top_k must be positive");
  if (beam_width && *beam_width <= 0) fail("beam_width must be positive");
  if (mode == DecodingMode::beam && !beam_width) fail("beam search requires beam_width");
  for (const auto& s : stop_sequences) {
    if (s.empty()) fail("stop sequences must be non-empty");
  }
}

double Completion::total_logprob() const {
  double sum = 0.0;
  for (const auto& t : tokens) sum += t.logprob;
  return sum;
}

std::vector<Completion> Backend::complete_n(const std::string& prompt,
                                            const DecodingParams& params, std::size_t n) const {
  std::vector<Completion> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    DecodingParams p = params;
    p.seed = derive_seed(params.seed, "sample", i);
    out.push_back(complete(prompt, p));
  }
  return out;
}

Gateway::Gateway(std::shared_ptr<const Backend> backend, GatewayOptions options)
    : backend_(std::move(backend)), options_(std::move(options)) {
  if (!backend_) throw Error(ErrorCode::precondition, "gateway needs a backend");
  if (options_.label_variants.empty()) {
    throw Error(ErrorCode::precondition, "at least one label variant is required");
  }
  options_.concurrency = std::max<std::size_t>(1, options_.concurrency);
}

Completion Gateway::complete(const std::string& prompt, const DecodingParams& params) const {
  if (prompt.empty()) throw Error(ErrorCode::precondition, "prompt must be non-empty");
  params.validate();
  return backend_->complete(prompt, params);
}

std::vector<Completion> Gateway::complete_n(const std::string& prompt,
                                            const DecodingParams& params, std::size_t n) const {
  if (prompt.empty()) throw Error(ErrorCode::precondition, "prompt must be non-empty");
  params.validate();
  return backend_->complete_n(prompt, params, n);
}

namespace {

std::string expand_variant(const std::string& pattern, const std::string& label) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const auto hit = pattern.find("{label}", pos);
    if (hit == std::string::npos) {
      out += pattern.substr(pos);
      return out;
    }
    out += pattern.substr(pos, hit - pos);
    out += label;
    pos = hit + 7;
  }
}

}  // namespace

ChoiceDistribution Gateway::label_distribution(const std::string& prompt,
                                               const std::vector<std::string>& labels) const {
  if (labels.empty()) throw Error(ErrorCode::precondition, "labels must be non-empty");
  {
    std::set<std::string> seen(labels.begin(), labels.end());
    if (seen.size() != labels.size()) {
      throw Error(ErrorCode::precondition, "labels must be pairwise distinct");
    }
  }

  // Flatten variants, remembering which label each belongs to.
  std::vector<std::string> candidates;
  std::vector<std::size_t> owner;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::set<std::string> variants;
    for (const auto& pattern : options_.label_variants) {
      variants.insert(expand_variant(pattern, labels[i]));
    }
    for (const auto& v : variants) {
      candidates.push_back(v);
      owner.push_back(i);
    }
  }

  const std::vector<double> lp = backend_->next_token_logprobs(prompt, candidates);
  if (lp.size() != candidates.size()) {
    throw Error(ErrorCode::backend_protocol_violation,
                "backend returned wrong number of candidate scores");
  }

  std::vector<std::vector<double>> pooled(labels.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (std::isnan(lp[c]) || lp[c] == std::numeric_limits<double>::infinity()) {
      throw Error(ErrorCode::backend_protocol_violation,
                  fmt::format("invalid log-probability for candidate '{}'", candidates[c]));
    }
    pooled[owner[c]].push_back(lp[c]);
  }
  std::vector<double> label_lp(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) label_lp[i] = log_sum_exp(pooled[i]);

  if (std::all_of(label_lp.begin(), label_lp.end(), [](double x) { return std::isinf(x); })) {
    throw Error(ErrorCode::backend_protocol_violation,
                fmt::format("no probability mass on any of the labels {}", labels));
  }

  const auto probs = softmax(label_lp);
  ChoiceDistribution dist;
  dist.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) dist.push_back({labels[i], probs[i]});
  return dist;
}

double Gateway::score_target(const std::string& prefix, const std::string& target) const {
  double sum = 0.0;
  for (const auto& t : score_tokens(prefix, target)) sum += t.logprob;
  return sum;
}

std::vector<TokenLogprob> Gateway::score_tokens(const std::string& prefix,
                                                const std::string& target) const {
  if (target.empty()) throw Error(ErrorCode::precondition, "target must be non-empty");
  auto tokens = backend_->score_tokens(prefix, target);
  for (const auto& t : tokens) {
    if (!std::isfinite(t.logprob)) {
      throw Error(ErrorCode::backend_protocol_violation, "non-finite target log-probability");
    }
  }
  return tokens;
}

double log_sum_exp(std::span<const double> xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (std::isinf(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

std::vector<double> softmax(std::span<const double> logits) {
  const double lse = log_sum_exp(logits);
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - lse);
    total += out[i];
  }
  // Second pass removes the last ulp-scale drift from exp/log rounding.
  for (double& p : out) p /= total;
  return out;
}

std::size_t argmax(const ChoiceDistribution& dist, bool* tie) {
  if (dist.empty()) throw Error(ErrorCode::precondition, "argmax of empty distribution");
  std::size_t best = 0;
  bool tied = false;
  for (std::size_t i = 1; i < dist.size(); ++i) {
    if (dist[i].probability > dist[best].probability) {
      best = i;
      tied = false;
    } else if (dist[i].probability == dist[best].probability) {
      tied = true;
    }
  }
  if (tie) *tie = tied;
  return best;
}

bool apply_stop_sequences(Completion& completion, const std::vector<std::string>& stops) {
  std::size_t cut = std::string::npos;
  for (const auto& s : stops) {
    if (s.empty()) continue;
    cut = std::min(cut, completion.text.find(s));
  }
  if (cut == std::string::npos) return false;

  completion.text.resize(cut);
  std::size_t consumed = 0;
  std::vector<TokenLogprob> kept;
  for (auto& t : completion.tokens) {
    if (consumed >= cut) break;
    if (consumed + t.token.size() > cut) t.token.resize(cut - consumed);
    consumed += t.token.size();
    kept.push_back(std::move(t));
  }
  completion.tokens = std::move(kept);
  completion.finish = FinishReason::stop_sequence;
  return true;
}

void apply_token_limit(Completion& completion, int max_tokens) {
  const auto limit = static_cast<std::size_t>(std::max(0, max_tokens));
  if (completion.tokens.size() <= limit) return;
  completion.tokens.resize(limit);
  completion.text.clear();
  for (const auto& t : completion.tokens) completion.text += t.token;
  completion.finish = FinishReason::length;
}

}  // namespace qgen
