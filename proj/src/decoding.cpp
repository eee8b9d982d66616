// SPDX-License-Identifier: Apache-2.0
#include "qgen/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qgen/error.hpp"
#include "qgen/seeding.hpp"

namespace qgen::decoding {
namespace {

std::size_t longest_stop(const std::vector<std::string>& stops) {
  std::size_t n = 0;
  for (const auto& s : stops) n = std::max(n, s.size());
  return n;
}

/// Looks for a stop sequence that ends within the most recently appended
/// `appended` bytes of `text`.
bool hits_stop(const std::string& text, std::size_t appended,
               const std::vector<std::string>& stops, std::size_t max_stop) {
  if (stops.empty() || appended == 0) return false;
  const std::size_t window = appended + max_stop - 1;
  const std::size_t from = text.size() > window ? text.size() - window : 0;
  for (const auto& s : stops) {
    if (text.find(s, from) != std::string::npos) return true;
  }
  return false;
}

void check_step(const StepDistribution& d) {
  if (d.tokens.empty() || d.tokens.size() != d.logprobs.size()) {
    throw Error(ErrorCode::backend_protocol_violation, "malformed step distribution");
  }
}

std::size_t pick_greedy(const StepDistribution& d) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < d.logprobs.size(); ++i) {
    if (d.logprobs[i] > d.logprobs[best]) best = i;
  }
  return best;
}

std::size_t pick_sampled(const StepDistribution& d, const DecodingParams& params, Rng& rng) {
  std::vector<double> scaled(d.logprobs.size());
  for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] = d.logprobs[i] / params.temperature;
  const auto probs = softmax(scaled);
  const auto support = nucleus_support(probs, params.top_p, params.top_k.value_or(0));

  double mass = 0.0;
  for (auto i : support) mass += probs[i];
  const double u = uniform01(rng) * mass;
  double acc = 0.0;
  for (auto i : support) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return support.back();
}

Completion decode_linear(const StepModel& model, const DecodingParams& params) {
  const bool greedy = params.mode == DecodingMode::greedy || params.temperature == 0.0 ||
                      (params.top_k && *params.top_k == 1);
  Rng rng(params.seed);
  const std::size_t max_stop = longest_stop(params.stop_sequences);

  Completion out;
  std::vector<std::string> generated;
  for (int step = 0; step < params.max_new_tokens; ++step) {
    const StepDistribution d = model.next(generated);
    check_step(d);
    const std::size_t pick = greedy ? pick_greedy(d) : pick_sampled(d, params, rng);
    const std::string& token = d.tokens[pick];
    if (token.empty()) {
      out.finish = FinishReason::end_of_text;
      return out;
    }
    generated.push_back(token);
    out.tokens.push_back({token, d.logprobs[pick]});
    out.text += token;
    if (hits_stop(out.text, token.size(), params.stop_sequences, max_stop)) {
      apply_stop_sequences(out, params.stop_sequences);
      return out;
    }
  }
  out.finish = FinishReason::length;
  return out;
}

struct Hypothesis {
  std::vector<std::string> tokens;
  std::vector<double> logprobs;
  std::string text;
  double score = 0.0;
};

double normalized(const Hypothesis& h, double length_penalty) {
  const double len = std::max<double>(1.0, static_cast<double>(h.tokens.size()));
  return h.score / std::pow(len, length_penalty);
}

Completion to_completion(const Hypothesis& h, FinishReason finish,
                         const std::vector<std::string>& stops) {
  Completion c;
  c.text = h.text;
  for (std::size_t i = 0; i < h.tokens.size(); ++i) c.tokens.push_back({h.tokens[i], h.logprobs[i]});
  c.finish = finish;
  if (finish == FinishReason::stop_sequence) apply_stop_sequences(c, stops);
  return c;
}

Completion decode_beam(const StepModel& model, const DecodingParams& params) {
  const auto width = static_cast<std::size_t>(params.beam_width.value_or(1));
  const std::size_t max_stop = longest_stop(params.stop_sequences);

  struct Finished {
    Hypothesis hyp;
    FinishReason reason;
    double rank;
  };
  std::vector<Finished> finished;
  std::vector<Hypothesis> alive(1);

  struct Expansion {
    std::size_t parent;
    std::size_t token;
    double score;
  };

  for (int step = 0; step < params.max_new_tokens && !alive.empty(); ++step) {
    std::vector<StepDistribution> dists;
    dists.reserve(alive.size());
    std::vector<Expansion> expansions;
    for (std::size_t h = 0; h < alive.size(); ++h) {
      dists.push_back(model.next(alive[h].tokens));
      check_step(dists.back());
      for (std::size_t t = 0; t < dists.back().tokens.size(); ++t) {
        expansions.push_back({h, t, alive[h].score + dists.back().logprobs[t]});
      }
    }
    std::stable_sort(expansions.begin(), expansions.end(),
                     [](const Expansion& a, const Expansion& b) { return a.score > b.score; });

    std::vector<Hypothesis> next_alive;
    for (const auto& e : expansions) {
      if (next_alive.size() >= width) break;
      const auto& d = dists[e.parent];
      const std::string& token = d.tokens[e.token];
      Hypothesis h = alive[e.parent];
      if (token.empty()) {
        h.score = e.score;
        finished.push_back({h, FinishReason::end_of_text, 0.0});
        continue;
      }
      h.tokens.push_back(token);
      h.logprobs.push_back(d.logprobs[e.token]);
      h.text += token;
      h.score = e.score;
      if (hits_stop(h.text, token.size(), params.stop_sequences, max_stop)) {
        finished.push_back({std::move(h), FinishReason::stop_sequence, 0.0});
        continue;
      }
      next_alive.push_back(std::move(h));
    }
    alive = std::move(next_alive);
    if (finished.size() >= width) break;
  }
  for (auto& h : alive) finished.push_back({std::move(h), FinishReason::length, 0.0});

  for (auto& f : finished) f.rank = normalized(f.hyp, params.length_penalty);
  const auto best = std::max_element(
      finished.begin(), finished.end(),
      // Strict comparison keeps the earliest-found hypothesis on ties.
      [](const Finished& a, const Finished& b) { return a.rank < b.rank; });
  return to_completion(best->hyp, best->reason, params.stop_sequences);
}

}  // namespace

std::vector<std::size_t> nucleus_support(std::span<const double> probs, double top_p,
                                         int top_k) {
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  if (top_k > 0 && static_cast<std::size_t>(top_k) < order.size()) order.resize(top_k);

  double total = 0.0;
  for (auto i : order) total += probs[i];
  double acc = 0.0;
  std::size_t keep = 0;
  while (keep < order.size()) {
    acc += probs[order[keep]];
    ++keep;
    if (acc >= top_p * total) break;
  }
  order.resize(std::max<std::size_t>(keep, 1));
  return order;
}

Completion decode(const StepModel& model, const DecodingParams& params) {
  params.validate();
  if (params.mode == DecodingMode::beam) return decode_beam(model, params);
  return decode_linear(model, params);
}

}  // namespace qgen::decoding
