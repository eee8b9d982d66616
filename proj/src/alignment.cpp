// SPDX-License-Identifier: Apache-2.0
#include "qgen/alignment.hpp"

#include <cmath>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "qgen/error.hpp"
#include "qgen/parallel.hpp"
#include "qgen/text.hpp"

namespace qgen::alignment {

void RelevanceMatrix::validate() const {
  if (scores.size() != lo_ids.size()) {
    throw Error(ErrorCode::precondition, "relevance matrix row count does not match LO ids");
  }
  for (const auto& row : scores) {
    if (row.size() != question_ids.size()) {
      throw Error(ErrorCode::precondition,
                  "relevance matrix column count does not match question ids");
    }
    for (double v : row) {
      if (!std::isfinite(v)) throw Error(ErrorCode::precondition, "non-finite relevance score");
    }
  }
}

std::string question_block(const Question& q, const TemplateSet& templates) {
  std::string choices;
  for (std::size_t i = 0; i < q.choices.size(); ++i) {
    if (i) choices += '\n';
    choices += render(templates.get("choice.anchor"), {{"label", text::label_for(i)}}) + " " +
               q.choices[i];
  }
  return render(templates.get("relevance.question"),
                {{"stem", q.stem},
                 {"choices", choices},
                 {"answer label", text::label_for(q.answer_index)}});
}

std::string lo_context(const LearningObjective& lo, const TemplateSet& templates) {
  return render(templates.get("relevance.context"), {{"learning objective", lo.text}});
}

namespace {

double log_prob(const Gateway& gateway, const std::string& prefix, const std::string& block,
                bool normalized) {
  const auto tokens = gateway.score_tokens(prefix, block);
  double sum = 0.0;
  for (const auto& t : tokens) sum += t.logprob;
  if (normalized && !tokens.empty()) sum /= static_cast<double>(tokens.size());
  return sum;
}

void check_question(const Question& q) {
  if (q.stem.empty() || q.choices.empty() || q.answer_index >= q.choices.size()) {
    throw Error(ErrorCode::precondition,
                "question " + q.id + " lacks a stem, choices or a valid answer");
  }
}

}  // namespace

double relevance(const Gateway& gateway, const LearningObjective& lo, const Question& q,
                 const TemplateSet& templates, const Options& options) {
  check_question(q);
  const std::string block = question_block(q, templates);
  const double conditional =
      log_prob(gateway, lo_context(lo, templates), block, options.length_normalized);
  if (options.scoring == Scoring::conditional_only) return conditional;
  return conditional - log_prob(gateway, "", block, options.length_normalized);
}

RelevanceMatrix relevance_matrix(const Gateway& gateway,
                                 const std::vector<LearningObjective>& los,
                                 const std::vector<Question>& questions,
                                 const TemplateSet& templates, const Options& options) {
  RelevanceMatrix m;
  for (const auto& lo : los) m.lo_ids.push_back(lo.id);
  std::vector<std::string> blocks;
  for (const auto& q : questions) {
    check_question(q);
    m.question_ids.push_back(q.id);
    blocks.push_back(question_block(q, templates));
  }
  std::vector<std::string> contexts;
  for (const auto& lo : los) contexts.push_back(lo_context(lo, templates));

  const std::size_t nq = questions.size();
  std::vector<double> baseline(nq, 0.0);
  if (options.scoring == Scoring::lift) {
    parallel_for(nq, gateway.concurrency(), [&](std::size_t j) {
      baseline[j] = log_prob(gateway, "", blocks[j], options.length_normalized);
    });
  }

  m.scores.assign(los.size(), std::vector<double>(nq, 0.0));
  parallel_for(los.size() * nq, gateway.concurrency(), [&](std::size_t cell) {
    const std::size_t i = cell / nq;
    const std::size_t j = cell % nq;
    m.scores[i][j] =
        log_prob(gateway, contexts[i], blocks[j], options.length_normalized) - baseline[j];
  });
  return m;
}

RelevanceMatrix relevance_matrix_per_pair(const Gateway& gateway,
                                          const std::vector<LearningObjective>& los,
                                          const std::vector<Question>& questions,
                                          const TemplateSet& templates,
                                          const Options& options) {
  RelevanceMatrix m;
  for (const auto& lo : los) m.lo_ids.push_back(lo.id);
  for (const auto& q : questions) m.question_ids.push_back(q.id);
  m.scores.assign(los.size(), std::vector<double>(questions.size(), 0.0));
  for (std::size_t i = 0; i < los.size(); ++i) {
    for (std::size_t j = 0; j < questions.size(); ++j) {
      m.scores[i][j] = relevance(gateway, los[i], questions[j], templates, options);
    }
  }
  return m;
}

ColumnDecision decide_column(const RelevanceMatrix& m, std::size_t j,
                             const std::string& origin_lo) {
  ColumnDecision d;
  if (m.scores.empty()) return d;
  std::size_t best = 0;
  bool tied = false;
  for (std::size_t i = 1; i < m.scores.size(); ++i) {
    const double v = m.scores[i].at(j);
    if (v > m.scores[best].at(j)) {
      best = i;
      tied = false;
    } else if (v == m.scores[best].at(j)) {
      tied = true;
    }
  }
  if (tied) return d;
  d.best = best;
  d.aligned = m.lo_ids[best] == origin_lo;
  return d;
}

AlignResult align_filter(const Gateway& gateway, std::vector<Question> questions,
                         const std::vector<LearningObjective>& los, const TemplateSet& templates,
                         const Options& options) {
  if (los.size() < 2) {
    throw Error(ErrorCode::precondition, "alignment needs at least two learning objectives");
  }
  for (const auto& q : questions) {
    if (q.stage != Stage::confidence_pass) {
      throw Error(ErrorCode::precondition, "question " + q.id + " is not at confidence-pass");
    }
  }

  AlignResult result;
  result.matrix = relevance_matrix(gateway, los, questions, templates, options);
  result.matrix.validate();

  for (std::size_t j = 0; j < questions.size(); ++j) {
    auto& q = questions[j];
    const auto decision = decide_column(result.matrix, j, q.origin_lo);

    AlignmentRecord record;
    for (std::size_t i = 0; i < los.size(); ++i) {
      record.relevance.push_back({los[i].id, result.matrix.scores[i][j]});
    }
    record.tie = !decision.best.has_value();
    if (decision.best) record.best_lo = los[*decision.best].id;
    record.aligned = decision.aligned;
    q.alignment = std::move(record);

    if (decision.aligned) {
      advance(q, Stage::alignment_pass);
      result.retained.push_back(std::move(q));
    } else {
      if (!decision.best) {
        spdlog::info("alignment tie for question {}; rejecting", q.id);
        reject(q, {std::string(kAlignmentTie)});
      } else {
        reject(q, {std::string(kMisaligned)});
      }
      result.rejected.push_back(std::move(q));
    }
  }
  return result;
}

std::string matrix_csv(const RelevanceMatrix& m) {
  m.validate();
  std::string out = "lo_id";
  for (const auto& id : m.question_ids) out += "," + id;
  out += '\n';
  for (std::size_t i = 0; i < m.lo_ids.size(); ++i) {
    out += m.lo_ids[i];
    for (double v : m.scores[i]) out += fmt::format(",{}", v);
    out += '\n';
  }
  return out;
}

void write_matrix_csv(const RelevanceMatrix& m, const std::filesystem::path& path) {
  write_text_file(path, matrix_csv(m));
}

}  // namespace qgen::alignment
