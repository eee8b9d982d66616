// SPDX-License-Identifier: Apache-2.0
#include <memory>

#include "doctest.h"
#include "qgen/error.hpp"
#include "qgen/generator.hpp"
#include "qgen/mock_backend.hpp"
#include "qgen/recording_backend.hpp"

using namespace qgen;

namespace {

const LearningObjective kIrrigation{"IRR-1", "describe different methods of irrigation",
                                    LoForm::action_based, std::nullopt, std::nullopt};

std::shared_ptr<mock::MockBackend> irrigation_mock() {
  return mock::MockBackend::from_scenario_file(QGEN_SOURCE_DIR "/tests/fixtures/irrigation_scenario.json");
}

}  // namespace

TEST_CASE("seed prompts embed the LO and branch on form") {
  const Gateway g(std::make_shared<mock::MockBackend>());
  const Generator gen(g, TemplateSet::defaults());
  const auto action = gen.seed_prompt(kIrrigation);
  CHECK(action.text().find("describe different methods of irrigation") != std::string::npos);
  CHECK(action.step() == PromptStep::seeded);

  auto content = kIrrigation;
  content.form = LoForm::content_based;
  const auto c = gen.seed_prompt(content);
  CHECK(c.text().find("understands the following facts:") != std::string::npos);
  CHECK(c.text() != action.text());
}

TEST_CASE("prompt steps only move forward one at a time") {
  PromptState s("seed", PromptStep::seeded);
  s.advance(" stem", PromptStep::stem_done);
  CHECK_THROWS_AS(s.advance("x", PromptStep::answer_done), Error);
  CHECK_THROWS_AS(s.advance("x", PromptStep::seeded), Error);
  CHECK(s.text() == "seed stem");
}

TEST_CASE("stem extraction") {
  CHECK(Generator::extract_stem(" Which one?\nmore text") == "Which one?");
  CHECK(Generator::extract_stem(" Which one? Really?") == "Which one? Really?");
  CHECK(Generator::extract_stem(" no question mark\nsecond") == "no question mark\nsecond");
  CHECK(Generator::extract_stem("   \n ").empty());
}

TEST_CASE("fixture drives stems, choices, answer and explanation") {
  auto m = irrigation_mock();
  const Gateway g(m);
  const Generator gen(g, TemplateSet::defaults());

  const auto stems = gen.generate_stems(kIrrigation, 3, 5);
  REQUIRE(stems.size() == 3);
  CHECK(stems[0] == "Which irrigation method delivers water directly to the roots of plants?");
  CHECK(stems[1] == "Which irrigation method sprays water over crops like rainfall?");

  const auto q = gen.build_question(kIrrigation, stems[0], question_id("IRR-1", 1), 9);
  CHECK(q.id == "IRR-1-0001");
  CHECK(q.choices == std::vector<std::string>{"Drip irrigation", "Sprinkler irrigation",
                                              "Furrow irrigation", "Flood irrigation"});
  CHECK(q.answer_index == 0);
  CHECK(q.answer_text() == "Drip irrigation");
  CHECK(q.explanation == "Drip irrigation delivers water through tubing and emitters placed at the root zone.");
  CHECK(q.flags.empty());
}

TEST_CASE("generation requests extend one prompt step by step") {
  auto rec = std::make_shared<RecordingBackend>(irrigation_mock());
  const Gateway g(rec);
  const Generator gen(g, TemplateSet::defaults());
  gen.build_question(kIrrigation, "Which irrigation method delivers water directly to the roots of plants?", "Q", 1);
  const auto prompts = rec->prompts();
  REQUIRE(prompts.size() == 6);  // 4 choices, answer, explanation
  for (std::size_t i = 1; i < prompts.size(); ++i) {
    // each request extends the previous one, minus the open anchor or directive
    const auto& prev = prompts[i - 1];
    const auto cut = prev.rfind('\n');
    CHECK(prompts[i].compare(0, cut + 1, prev, 0, cut + 1) == 0);
    CHECK(prompts[i].size() > prev.size());
  }
  CHECK(prompts[2].find("a) Drip irrigation\nb) Sprinkler irrigation\nc)") != std::string::npos);
}

TEST_CASE("k controls the number of choices") {
  auto m = irrigation_mock();
  const Gateway g(m);
  GeneratorConfig cfg;
  cfg.choices_k = 2;
  const Generator gen(g, TemplateSet::defaults(), cfg);
  const auto q = gen.build_question(kIrrigation, "Which method?", "Q", 1);
  CHECK(q.choices.size() == 2);
  cfg.choices_k = 1;
  CHECK_THROWS_AS(Generator(g, TemplateSet::defaults(), cfg), Error);
}

TEST_CASE("explanations are capped and flagged") {
  std::string longtext;
  for (int i = 0; i < 250; ++i) longtext += " word";
  mock::Rule r;
  r.pattern = "Explanation:";
  r.mode = mock::MatchMode::suffix;
  r.completions = {longtext};
  auto m = std::make_shared<mock::MockBackend>(mock::ScoringConfig{}, std::vector<mock::Rule>{r});
  const Gateway g(m);
  const Generator gen(g, TemplateSet::defaults());
  const auto q = gen.build_question(kIrrigation, "Which irrigation method is best?", "Q", 3);
  CHECK(mock::tokenize(q.explanation).size() == 200);
  CHECK(std::find(q.flags.begin(), q.flags.end(), "explanation-truncated") != q.flags.end());
  CHECK(gen.build_question(kIrrigation, "Which irrigation method is best?", "Q", 3) == q);
}

TEST_CASE("uniform answer scores fall back to the lowest label") {
  mock::ScoringConfig cfg;
  cfg.base = mock::ScoringConfig::Base::uniform;
  auto m = std::make_shared<mock::MockBackend>(cfg);
  const Gateway g(m);
  const Generator gen(g, TemplateSet::defaults());
  PromptState s = gen.with_stem(kIrrigation, "Which?");
  s.append("a) x\nb) y\n");
  s.advance("", PromptStep::choices_done);
  const auto sel = gen.select_answer(s, {"x", "y"});
  CHECK(sel.index == 0);
  CHECK(sel.tie);
}

TEST_CASE("missing anchor continuation is kept and flagged") {
  mock::Rule r;
  r.pattern = ")";
  r.mode = mock::MatchMode::suffix;
  r.completions = {""};
  auto m = std::make_shared<mock::MockBackend>(mock::ScoringConfig{}, std::vector<mock::Rule>{r});
  const Gateway g(m);
  const Generator gen(g, TemplateSet::defaults());
  PromptState s = gen.with_stem(kIrrigation, "Which?");
  CHECK_THROWS_AS(gen.generate_choices(s, 4, 1), Error);
  const auto q = gen.build_question(kIrrigation, "Which?", "Q", 1);
  CHECK(q.choices == std::vector<std::string>(4, ""));
  CHECK(std::find(q.flags.begin(), q.flags.end(), "anchor-not-produced") != q.flags.end());
}

TEST_CASE("zero usable stems is an error after retries") {
  mock::Rule r;
  r.pattern = "Question:";
  r.mode = mock::MatchMode::suffix;
  r.completions = {"   "};
  auto m = std::make_shared<mock::MockBackend>(mock::ScoringConfig{}, std::vector<mock::Rule>{r});
  const Gateway g(m);
  const Generator gen(g, TemplateSet::defaults());
  try {
    gen.generate_stems(kIrrigation, 2, 1);
    FAIL("expected zero-usable-output");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::zero_usable_output);
  }
}

TEST_CASE("mock generation is reproducible and yields the target count") {
  const Gateway g(std::make_shared<mock::MockBackend>());
  GeneratorConfig cfg;
  cfg.batch_size = 7;
  const Generator gen(g, TemplateSet::defaults(), cfg);
  const auto a = gen.generate({kIrrigation}, 12, 77);
  CHECK(a.size() == 12);
  CHECK(a == gen.generate({kIrrigation}, 12, 77));
  for (const auto& q : a) {
    CHECK(q.answer_index < q.choices.size());
    CHECK(q.origin_lo == "IRR-1");
  }
  CHECK(a != gen.generate({kIrrigation}, 12, 78));
}
