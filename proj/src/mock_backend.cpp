// SPDX-License-Identifier: Apache-2.0
#include "qgen/mock_backend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"
#include "qgen/decoding.hpp"
#include "qgen/error.hpp"
#include "qgen/seeding.hpp"
#include "qgen/text.hpp"

namespace qgen::mock {
namespace {

using json = nlohmann::json;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\r'; }

std::uint64_t context_hash(std::span<const std::string> context, int window) {
  const std::size_t w = static_cast<std::size_t>(std::max(0, window));
  const std::size_t from = context.size() > w ? context.size() - w : 0;
  std::uint64_t h = fnv1a("");
  for (std::size_t i = from; i < context.size(); ++i) {
    h = fnv1a(context[i], h);
    h = fnv1a("\x1f", h);
  }
  return h;
}

double base_logprob(const ScoringConfig& cfg, std::uint64_t ctx_hash, const std::string& token) {
  if (cfg.base == ScoringConfig::Base::uniform) {
    return -std::log(static_cast<double>(cfg.uniform_vocab));
  }
  const std::uint64_t h = mix64(ctx_hash ^ mix64(fnv1a(token)));
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  return -(0.05 + cfg.spread * u);
}

/// Generation-time view of the fallback scorer with the prompt bound in.
class FallbackStepModel final : public decoding::StepModel {
 public:
  FallbackStepModel(const MockBackend& backend, const std::string& prompt)
      : backend_(backend), cfg_(backend.scoring()), prompt_tokens_(tokenize(prompt)) {
    for (const auto& t : prompt_tokens_) {
      auto w = keyword_of(t, cfg_.min_keyword_length);
      if (!w.empty() && prompt_keywords_.insert(w).second) prompt_keyword_order_.push_back(w);
    }
  }

  decoding::StepDistribution next(std::span<const std::string> generated) const override {
    std::unordered_set<std::string> generated_keywords;
    std::vector<std::string> new_keywords;
    for (const auto& t : generated) {
      auto w = keyword_of(t, cfg_.min_keyword_length);
      if (w.empty() || prompt_keywords_.count(w)) continue;
      if (generated_keywords.insert(w).second) new_keywords.push_back(w);
    }
    auto known = [&](const std::string& w) {
      return prompt_keywords_.count(w) > 0 || generated_keywords.count(w) > 0;
    };

    // Context tail for the hash: last `window` tokens of prompt + generated.
    std::vector<std::string> tail;
    const std::size_t w = static_cast<std::size_t>(std::max(0, cfg_.window));
    const std::size_t total = prompt_tokens_.size() + generated.size();
    for (std::size_t i = total > w ? total - w : 0; i < total; ++i) {
      tail.push_back(i < prompt_tokens_.size() ? prompt_tokens_[i]
                                               : generated[i - prompt_tokens_.size()]);
    }
    const std::uint64_t ctx = context_hash(tail, cfg_.window);

    decoding::StepDistribution d;
    std::unordered_set<std::string> seen;
    auto add = [&](const std::string& token) {
      if (!seen.insert(token).second) return;
      double lp = base_logprob(cfg_, ctx, token);
      if (token.empty() || token == "\n") {
        const int missing = cfg_.min_span - static_cast<int>(generated.size());
        if (missing > 0) lp -= cfg_.end_penalty * missing;
      } else {
        const auto kw = keyword_of(token, cfg_.min_keyword_length);
        if (!kw.empty() && known(kw)) lp += cfg_.keyword_boost;
      }
      d.tokens.push_back(token);
      d.logprobs.push_back(lp);
    };
    for (const auto& v : backend_.vocabulary()) add(v);
    if (cfg_.keyword_boost != 0.0) {
      for (const auto& k : prompt_keyword_order_) add(" " + k);
      for (const auto& k : new_keywords) add(" " + k);
    }
    add(std::string());  // end of text

    const double lse = log_sum_exp(d.logprobs);
    for (double& lp : d.logprobs) lp -= lse;
    return d;
  }

 private:
  const MockBackend& backend_;
  const ScoringConfig& cfg_;
  std::vector<std::string> prompt_tokens_;
  std::unordered_set<std::string> prompt_keywords_;
  std::vector<std::string> prompt_keyword_order_;
};

MatchMode parse_mode(const std::string& s) {
  if (s == "contains") return MatchMode::contains;
  if (s == "prefix") return MatchMode::prefix;
  if (s == "suffix") return MatchMode::suffix;
  if (s == "exact") return MatchMode::exact;
  if (s == "regex") return MatchMode::regex;
  throw ParseError("scenario", 0, "unknown match mode '" + s + "'");
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const std::size_t start = i;
    if (text[i] == '\n') {
      out.emplace_back("\n");
      ++i;
      continue;
    }
    while (i < n && is_blank(text[i])) ++i;
    if (i == n || text[i] == '\n') {
      out.emplace_back(text.substr(start, i - start));
      continue;
    }
    if (is_word_byte(static_cast<unsigned char>(text[i]))) {
      while (i < n && is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
    } else {
      ++i;
    }
    out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

std::string keyword_of(std::string_view token, int min_length) {
  std::size_t b = 0;
  while (b < token.size() && (is_blank(token[b]) || token[b] == '\n')) ++b;
  const auto word = token.substr(b);
  if (word.empty() || static_cast<int>(word.size()) < min_length) return {};
  for (unsigned char c : word) {
    if (!is_word_byte(c)) return {};
  }
  return text::to_lower(word);
}

const std::vector<std::string>& builtin_vocabulary() {
  static const std::vector<std::string> vocab = [] {
    const char* words[] = {
        "What", "Which", "How", "Why", "the", "of", "a", "an", "and", "or", "in", "on",
        "to", "is", "are", "by", "for", "from", "with", "most", "main", "primary",
        "effect", "effects", "cause", "causes", "process", "result", "results", "increase",
        "decrease", "impact", "impacts", "human", "activity", "water", "soil", "carbon",
        "nitrogen", "energy", "population", "species", "ecosystem", "ecosystems", "climate",
        "temperature", "pollution", "forest", "forests", "ocean", "river", "land",
        "agriculture", "crops", "fertilizer", "runoff", "nutrients", "oxygen", "algae",
        "growth", "habitat", "loss", "biodiversity", "resources", "method", "methods",
        "practice", "practices", "reduce", "prevent", "protect", "support", "change",
        "changes", "rate", "level", "levels", "during", "between", "through", "example",
        "likely", "best", "describes", "explains", "occurs", "following", "statement",
        "true", "not", "all", "none", "because", "can", "does", "when", "that", "this",
        "these", "their", "its", "more", "less", "high", "low", "natural", "global"};
    std::vector<std::string> v;
    for (const char* w : words) v.push_back(std::string(" ") + w);
    for (const char* p : {"?", ".", ",", "\n"}) v.emplace_back(p);
    return v;
  }();
  return vocab;
}

bool Rule::matches(const std::string& prompt) const {
  switch (mode) {
    case MatchMode::contains: return prompt.find(pattern) != std::string::npos;
    case MatchMode::prefix: return text::starts_with(prompt, pattern);
    case MatchMode::suffix: return text::ends_with(prompt, pattern);
    case MatchMode::exact: return prompt == pattern;
    case MatchMode::regex:
      return compiled ? std::regex_search(prompt, *compiled)
                      : std::regex_search(prompt, std::regex(pattern));
  }
  return false;
}

MockBackend::MockBackend(ScoringConfig scoring, std::vector<Rule> rules)
    : scoring_(std::move(scoring)), rules_(std::move(rules)) {
  if (scoring_.uniform_vocab <= 0) throw Error(ErrorCode::precondition, "uniform_vocab must be > 0");
  vocabulary_ = scoring_.vocabulary.empty() ? builtin_vocabulary() : scoring_.vocabulary;
  for (auto& r : rules_) {
    if (r.mode == MatchMode::regex && !r.compiled) r.compiled.emplace(r.pattern);
  }
}

std::shared_ptr<MockBackend> MockBackend::from_scenario_text(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError("scenario", 0, e.what());
  }
  const auto version = doc.value("schema_version", std::string("1"));
  if (version != "1") {
    throw Error(ErrorCode::schema_version_mismatch,
                "scenario schema_version '" + version + "' (expected '1')");
  }

  ScoringConfig cfg;
  try {
    if (doc.contains("scoring")) {
      const auto& s = doc.at("scoring");
      const auto base = s.value("base", std::string("hash"));
      if (base == "uniform") {
        cfg.base = ScoringConfig::Base::uniform;
      } else if (base != "hash") {
        throw ParseError("scenario", 0, "unknown scoring base '" + base + "'");
      }
      cfg.uniform_vocab = s.value("uniform_vocab", cfg.uniform_vocab);
      cfg.spread = s.value("spread", cfg.spread);
      cfg.window = s.value("window", cfg.window);
      cfg.keyword_boost = s.value("keyword_boost", cfg.keyword_boost);
      cfg.min_keyword_length = s.value("min_keyword_length", cfg.min_keyword_length);
      cfg.end_penalty = s.value("end_penalty", cfg.end_penalty);
      cfg.min_span = s.value("min_span", cfg.min_span);
      if (s.contains("vocabulary")) cfg.vocabulary = s.at("vocabulary").get<std::vector<std::string>>();
    }

    std::vector<Rule> rules;
    for (const auto& r : doc.value("rules", json::array())) {
      Rule rule;
      rule.pattern = r.at("match").get<std::string>();
      rule.mode = parse_mode(r.value("mode", std::string("contains")));
      if (r.contains("completion")) rule.completions.push_back(r.at("completion").get<std::string>());
      if (r.contains("completions")) {
        for (const auto& c : r.at("completions")) rule.completions.push_back(c.get<std::string>());
      }
      if (r.contains("token_logprobs")) {
        for (const auto& [token, value] : r.at("token_logprobs").items()) {
          rule.token_logprobs[token] = value.is_null() ? kNegInf : value.get<double>();
        }
      }
      rules.push_back(std::move(rule));
    }
    return std::make_shared<MockBackend>(std::move(cfg), std::move(rules));
  } catch (const json::exception& e) {
    throw ParseError("scenario", 0, e.what());
  }
}

std::shared_ptr<MockBackend> MockBackend::from_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open scenario file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_scenario_text(ss.str());
}

const Rule* MockBackend::find_rule(const std::string& prompt, bool want_completion) const {
  for (const auto& r : rules_) {
    const bool has = want_completion ? !r.completions.empty() : !r.token_logprobs.empty();
    if (has && r.matches(prompt)) return &r;
  }
  return nullptr;
}

Completion MockBackend::scripted(const std::string& text, const DecodingParams& params) const {
  Completion c;
  c.text = text;
  for (auto& t : tokenize(text)) c.tokens.push_back({std::move(t), 0.0});
  c.finish = FinishReason::end_of_text;
  apply_stop_sequences(c, params.stop_sequences);
  apply_token_limit(c, params.max_new_tokens);
  return c;
}

Completion MockBackend::complete(const std::string& prompt, const DecodingParams& params) const {
  if (const Rule* r = find_rule(prompt, true)) return scripted(r->completions.front(), params);
  const FallbackStepModel model(*this, prompt);
  return decoding::decode(model, params);
}

std::vector<Completion> MockBackend::complete_n(const std::string& prompt,
                                                const DecodingParams& params,
                                                std::size_t n) const {
  if (const Rule* r = find_rule(prompt, true)) {
    std::vector<Completion> out;
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back(scripted(r->completions[i % r->completions.size()], params));
    }
    return out;
  }
  return Backend::complete_n(prompt, params, n);
}

double MockBackend::token_logprob(std::span<const std::string> context,
                                  const std::unordered_set<std::string>& keywords,
                                  const std::string& token) const {
  double lp = base_logprob(scoring_, context_hash(context, scoring_.window), token);
  const auto kw = keyword_of(token, scoring_.min_keyword_length);
  if (!kw.empty() && keywords.count(kw)) lp += scoring_.keyword_boost;
  return lp;
}

std::vector<double> MockBackend::next_token_logprobs(
    const std::string& prompt, std::span<const std::string> candidates) const {
  for (const auto& c : candidates) {
    if (tokenize(c).size() != 1) {
      throw Error(ErrorCode::label_not_tokenizable,
                  fmt::format("'{}' is not a single mock token", c));
    }
  }
  std::vector<double> out;
  out.reserve(candidates.size());
  if (const Rule* r = find_rule(prompt, false)) {
    for (const auto& c : candidates) {
      const auto it = r->token_logprobs.find(c);
      out.push_back(it == r->token_logprobs.end() ? kNegInf : it->second);
    }
    return out;
  }

  const auto context = tokenize(prompt);
  std::unordered_set<std::string> keywords;
  for (const auto& t : context) {
    auto w = keyword_of(t, scoring_.min_keyword_length);
    if (!w.empty()) keywords.insert(std::move(w));
  }
  for (const auto& c : candidates) out.push_back(token_logprob(context, keywords, c));
  return out;
}

std::vector<TokenLogprob> MockBackend::score_tokens(const std::string& prefix,
                                                    const std::string& target) const {
  const auto all = tokenize(prefix + target);
  std::size_t offset = 0;
  std::size_t first_target = all.size();
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (offset == prefix.size()) {
      first_target = i;
      break;
    }
    offset += all[i].size();
    if (offset > prefix.size()) {
      throw Error(ErrorCode::tokenization_boundary_mismatch,
                  "target does not start on a token boundary after the prefix");
    }
  }

  std::unordered_set<std::string> keywords;
  for (std::size_t i = 0; i < first_target; ++i) {
    auto w = keyword_of(all[i], scoring_.min_keyword_length);
    if (!w.empty()) keywords.insert(std::move(w));
  }
  std::vector<TokenLogprob> out;
  for (std::size_t i = first_target; i < all.size(); ++i) {
    const std::span<const std::string> context(all.data(), i);
    out.push_back({all[i], token_logprob(context, keywords, all[i])});
    auto w = keyword_of(all[i], scoring_.min_keyword_length);
    if (!w.empty()) keywords.insert(std::move(w));
  }
  return out;
}

}  // namespace qgen::mock
