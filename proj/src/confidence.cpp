// SPDX-License-Identifier: Apache-2.0
#include "qgen/confidence.hpp"

#include "qgen/error.hpp"
#include "qgen/parallel.hpp"
#include "qgen/seeding.hpp"
#include "qgen/text.hpp"

namespace qgen::confidence {

std::vector<std::string> PresentedQuestion::labels() const {
  std::vector<std::string> out;
  out.reserve(presented_choices.size());
  for (const auto& [label, _] : presented_choices) out.push_back(label);
  return out;
}

PresentedQuestion present(const Question& q, std::uint64_t seed, const std::string& nota_text) {
  PresentedQuestion pq;
  pq.question_id = q.id;
  pq.stem = q.stem;
  pq.index_map = seeded_permutation(q.choices.size(), seed);
  for (std::size_t p = 0; p < pq.index_map.size(); ++p) {
    pq.presented_choices.emplace_back(text::label_for(p), q.choices[pq.index_map[p]]);
  }
  pq.nota_position = pq.presented_choices.size();
  pq.presented_choices.emplace_back(text::label_for(pq.nota_position), nota_text);
  return pq;
}

std::string answer_prompt(const PresentedQuestion& pq, const TemplateSet& templates) {
  std::string choices;
  for (std::size_t i = 0; i < pq.presented_choices.size(); ++i) {
    if (i) choices += '\n';
    choices += render(templates.get("choice.anchor"), {{"label", pq.presented_choices[i].first}}) +
               " " + pq.presented_choices[i].second;
  }
  return render(templates.get("confidence.prompt"), {{"stem", pq.stem}, {"choices", choices}});
}

ChoiceDistribution confidence(const Gateway& gateway, const PresentedQuestion& pq,
                              const TemplateSet& templates) {
  return gateway.label_distribution(answer_prompt(pq, templates), pq.labels());
}

ConfidenceDecision decide_from(const ChoiceDistribution& dist, const std::string& nota_label,
                               double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw Error(ErrorCode::precondition, "threshold must be in (0, 1)");
  }
  ConfidenceDecision d;
  d.distribution = dist;
  d.threshold = threshold;
  const std::size_t top = argmax(dist);
  d.top_label = dist[top].label;
  d.top_probability = dist[top].probability;
  if (d.top_label == nota_label) {
    d.reason = kNotaArgmax;
  } else if (d.top_probability > threshold) {
    d.accepted = true;
    d.reason = kAccepted;
  } else {
    d.reason = kLowConfidence;
  }
  return d;
}

ConfidenceDecision decide(const Gateway& gateway, const Question& q, double threshold,
                          std::uint64_t seed, const TemplateSet& templates) {
  const auto pq = present(q, seed, templates.get("nota.text"));
  auto d = decide_from(confidence(gateway, pq, templates), pq.nota_label(), threshold);
  d.question_id = q.id;
  d.seed = seed;
  d.permutation = pq.index_map;
  return d;
}

std::uint64_t question_seed(std::uint64_t stage_seed, const std::string& question_id) {
  return derive_seed(stage_seed, question_id);
}

ConfidenceRecord to_record(const ConfidenceDecision& d) {
  ConfidenceRecord r;
  r.seed = d.seed;
  r.permutation = d.permutation;
  r.distribution = d.distribution;
  r.top_label = d.top_label;
  r.top_probability = d.top_probability;
  r.threshold = d.threshold;
  r.accepted = d.accepted;
  r.reason = d.reason;
  return r;
}

std::vector<ConfidenceDecision> validate(const Gateway& gateway, std::vector<Question>& questions,
                                         double threshold, std::uint64_t stage_seed,
                                         const TemplateSet& templates) {
  for (const auto& q : questions) {
    if (q.stage != Stage::syntactic_pass) {
      throw Error(ErrorCode::precondition,
                  "question " + q.id + " is not at syntactic-pass");
    }
  }
  std::vector<ConfidenceDecision> decisions(questions.size());
  parallel_for(questions.size(), gateway.concurrency(), [&](std::size_t i) {
    decisions[i] = decide(gateway, questions[i], threshold,
                          question_seed(stage_seed, questions[i].id), templates);
  });
  for (std::size_t i = 0; i < questions.size(); ++i) {
    auto& q = questions[i];
    q.confidence = to_record(decisions[i]);
    if (decisions[i].accepted) {
      advance(q, Stage::confidence_pass);
    } else {
      reject(q, {decisions[i].reason});
    }
  }
  return decisions;
}

}  // namespace qgen::confidence
