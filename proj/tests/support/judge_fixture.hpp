// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "qgen/judge.hpp"
#include "qgen/mock_backend.hpp"
#include "qgen/text.hpp"

namespace fixture {

/// n_los objectives with `per_lo` alignment-pass questions each.
inline qgen::QuestionBank aligned_bank(std::size_t n_los, std::size_t per_lo) {
  qgen::QuestionBank bank;
  static const char* topics[] = {"carbon", "nitrogen", "water", "soil", "energy", "forests",
                                 "oceans", "climate", "wetlands", "deserts"};
  for (std::size_t l = 0; l < n_los; ++l) {
    const std::string id = "LO-" + std::to_string(l + 1);
    bank.objectives.push_back({id, std::string("Explain the role of ") + topics[l % 10] + " in ecosystems.",
                               qgen::LoForm::action_based, std::nullopt, std::nullopt});
    for (std::size_t k = 0; k < per_lo; ++k) {
      qgen::Question q;
      q.id = id + "-" + std::to_string(k + 1);
      q.origin_lo = id;
      q.stem = "Fixture question " + q.id + " about " + topics[l % 10] + "?";
      q.choices = {"First option " + q.id, "Second option " + q.id, "Third option " + q.id,
                   "Fourth option " + q.id};
      q.answer_index = (l + k) % 4;
      q.explanation = "Fixture explanation for " + q.id + ".";
      q.stage = qgen::Stage::alignment_pass;
      q.alignment = qgen::AlignmentRecord{{}, id, false, true};
      bank.questions.push_back(q);
    }
  }
  return bank;
}

struct Expected {
  std::string label;                   // turn-1 argmax
  std::vector<double> answer_probs;    // over a..e
  double p_yes = 0.0;
};

/// Scripted judge: exact-prompt rules for both turns of every (question,
/// shown LO) pair in `set`. Each item gets a distinct answer label and p_yes.
class ScriptedJudge {
 public:
  ScriptedJudge(const qgen::QuestionBank& bank, const qgen::judge::EvalSet& set,
                const qgen::TemplateSet& t) {
    std::vector<qgen::mock::Rule> rules;
    for (std::size_t i = 0; i < set.items.size(); ++i) {
      const auto& item = set.items[i];
      const qgen::Question* q = nullptr;
      for (const auto& c : bank.questions) if (c.id == item.question_id) q = &c;
      const auto* shown = bank.find_objective(item.shown_lo);

      Expected e;
      const std::size_t top = i % 5;  // includes NOTA (index 4)
      const double high = 0.55 + 0.4 * static_cast<double>(i % 7) / 7.0;
      const double rest = (1.0 - high) / 4.0;
      qgen::mock::Rule r1;
      r1.mode = qgen::mock::MatchMode::exact;
      r1.pattern = qgen::judge::render_conversation(
          {{t.get("role.user"), qgen::judge::answer_message(*q, t)},
           {t.get("role.assistant"), t.get("judge.answer.prefix")}});
      for (std::size_t k = 0; k < 5; ++k) {
        const double p = k == top ? high : rest;
        r1.token_logprobs[qgen::text::label_for(k)] = std::log(p);
        e.answer_probs.push_back(p);
      }
      e.label = qgen::text::label_for(top);

      e.p_yes = 0.05 + 0.9 * static_cast<double>((i * 37) % 64) / 64.0;
      qgen::mock::Rule r2;
      r2.mode = qgen::mock::MatchMode::exact;
      r2.pattern = qgen::judge::render_conversation(
          {{t.get("role.user"), qgen::judge::answer_message(*q, t)},
           {t.get("role.assistant"), t.get("judge.answer.prefix") + e.label + "**"},
           {t.get("role.user"), qgen::judge::alignment_message(*shown, t)},
           {t.get("role.assistant"), t.get("judge.alignment.prefix")}});
      r2.token_logprobs = {{"Yes", std::log(e.p_yes)}, {"No", std::log(1.0 - e.p_yes)}};

      rules.push_back(std::move(r1));
      rules.push_back(std::move(r2));
      expected_[item.question_id] = e;
    }
    backend_ = std::make_shared<qgen::mock::MockBackend>(qgen::mock::ScoringConfig{}, std::move(rules));
  }

  std::shared_ptr<qgen::mock::MockBackend> backend() const { return backend_; }
  const Expected& expected(const std::string& qid) const { return expected_.at(qid); }

 private:
  std::shared_ptr<qgen::mock::MockBackend> backend_;
  std::map<std::string, Expected> expected_;
};

}  // namespace fixture
