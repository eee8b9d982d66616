// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <map>
#include <set>

#include "corpus.hpp"
#include "doctest.h"
#include "generators.hpp"
#include "qgen/error.hpp"
#include "qgen/question_bank.hpp"
#include "qgen/seeding.hpp"
#include "qgen/syntactic_filter.hpp"

using namespace qgen;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("qgen_unit_" + name);
}

QuestionBank two_question_bank() {
  QuestionBank b;
  b.objectives = {{"IRR-1", "describe different methods of irrigation", LoForm::action_based,
                   std::nullopt, std::nullopt},
                  {"ERT-1.D", "Explain the steps and reservoir interactions in the carbon cycle.",
                   LoForm::action_based, "Unit 1", "Topic 1.4"}};
  auto q1 = corpus::clean();
  q1.generation_seed = 0xffffffffffffffffULL;
  q1.flags = {"answer-tie"};
  auto q2 = corpus::make("C2", "Which reservoir holds the most carbon on Earth?",
                         {"Deep ocean water", "Atmosphere gases", "Living biomass", "Soil organic matter"});
  q2.origin_lo = "ERT-1.D";
  q2.answer_index = 3;
  advance(q2, Stage::syntactic_pass);
  q2.confidence = ConfidenceRecord{7, {2, 0, 3, 1}, {{"a", 0.1}, {"b", 0.6}, {"c", 0.1}, {"d", 0.1}, {"e", 0.1}}, "b", 0.6, 0.9, false, "low-confidence"};
  reject(q2, {"low-confidence"});
  b.questions = {q1, q2};
  b.pipeline_config_digest = "0123456789abcdef";
  return b;
}

}  // namespace

TEST_CASE("objectives load from TSV and CSV") {
  const auto los = parse_objectives(
      "#schema_version=1\nid\tform\ttext\tunit\ttopic\n"
      "ERT-1.D\taction\tExplain the steps and reservoir interactions in the carbon cycle.\tUnit 1\tTopic 1.4\n",
      '\t');
  REQUIRE(los.size() == 1);
  CHECK(los[0].id == "ERT-1.D");
  CHECK(los[0].text == "Explain the steps and reservoir interactions in the carbon cycle.");
  CHECK(los[0].form == LoForm::action_based);
  CHECK(los[0].topic == "Topic 1.4");

  CHECK(parse_objectives("", '\t').empty());
  const auto csv = parse_objectives("X-1,content,\"Water, mostly\"\n", ',');
  REQUIRE(csv.size() == 1);
  CHECK(csv[0].form == LoForm::content_based);
}

TEST_CASE("objective files reject duplicates, bad rows and versions") {
  try {
    parse_objectives("A\taction\tone\nA\taction\ttwo\n", '\t');
    FAIL("expected duplicate-id");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::duplicate_id);
  }
  try {
    parse_objectives("A\taction\tone\nB\tweird\ttwo\n", '\t');
    FAIL("expected parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_objectives("#schema_version=7\n", '\t'), Error);
  CHECK_THROWS_AS(parse_objectives("A\taction\t \n", '\t'), ParseError);
}

TEST_CASE("sample objective file loads") {
  const auto los = load_objectives(QGEN_SOURCE_DIR "/data/objectives_sample.tsv");
  CHECK(los.size() == 8);
  CHECK(los.front().id == "ERT-1.D");
}

TEST_CASE("canonical keys") {
  auto a = corpus::clean();
  auto b = a;
  b.stem += "   ";
  b.choices[1] = "  SPRINKLER   irrigation ";
  CHECK(canonical_key(a) == canonical_key(b));

  auto c = a;
  c.choices[3] = "Subsurface irrigation";
  CHECK(canonical_key(a) != canonical_key(c));

  // every reordering of three choices gives a distinct key
  std::set<std::string> keys;
  std::vector<std::string> ch{"one choice", "two choice", "three choice"};
  std::sort(ch.begin(), ch.end());
  do {
    auto q = a;
    q.choices = ch;
    keys.insert(canonical_key(q));
  } while (std::next_permutation(ch.begin(), ch.end()));
  CHECK(keys.size() == 6);
}

TEST_CASE("stage transitions are monotone") {
  auto q = corpus::clean();
  advance(q, Stage::syntactic_pass);
  CHECK_THROWS_AS(advance(q, Stage::generated), Error);
  CHECK_THROWS_AS(reject(q, {}), Error);
  reject(q, {"low-confidence"});
  CHECK(q.stage == Stage::rejected);
  CHECK(q.rejected_from == Stage::syntactic_pass);
  CHECK_THROWS_AS(advance(q, Stage::alignment_pass), Error);
}

TEST_CASE("bank round trip") {
  const auto bank = two_question_bank();
  const auto path = temp_path("bank.jsonl");
  write_bank(bank, path);
  const auto back = read_bank(path);
  CHECK(back == bank);
  CHECK(serialize_bank(back) == serialize_bank(bank));
  CHECK(bank_digest(back) == bank_digest(bank));
  fs::remove(path);
}

TEST_CASE("bank parsing errors") {
  auto text = serialize_bank(two_question_bank());
  auto bad_version = text;
  bad_version.replace(bad_version.find("\"schema_version\":\"1\""), 20, "\"schema_version\":\"9\"");
  try {
    parse_bank(bad_version);
    FAIL("expected version mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::schema_version_mismatch);
  }
  CHECK_THROWS_AS(parse_bank(text + "{oops\n"), ParseError);
  CHECK_THROWS_AS(parse_bank(""), Error);

  auto dup = two_question_bank();
  dup.questions[1].id = dup.questions[0].id;
  CHECK_THROWS_AS(parse_bank(serialize_bank(dup)), Error);
  auto orphan = two_question_bank();
  orphan.questions[0].origin_lo = "NOPE";
  CHECK_THROWS_AS(orphan.validate(), Error);
}

TEST_CASE("large mock-sized bank round trips by digest") {
  gen::Source src(11);
  QuestionBank bank;
  bank.objectives = {{"L1", "text one", LoForm::action_based, std::nullopt, std::nullopt}};
  for (int i = 0; i < 8200; ++i) bank.questions.push_back(src.clean_question("L1-" + std::to_string(i), "L1"));
  const auto text = serialize_bank(bank);
  CHECK(content_digest(serialize_bank(parse_bank(text))) == content_digest(text));
}

TEST_CASE("screen: single-rule examples") {
  using namespace screening;
  auto q = corpus::clean();
  CHECK(screen(q).passed);

  auto s = q;
  s.stem = "What?";
  CHECK(screen(s).reasons == std::vector<std::string>{"stem-too-short"});

  auto n = q;
  n.choices[2] = "None of the above";
  CHECK(screen(n).reasons == std::vector<std::string>{"choice-flawed-aota-nota"});

  auto y = q;
  y.choices[0] = "Yes";
  CHECK(screen(y).reasons == std::vector<std::string>{"choice-too-short", "choice-dichotomous"});

  auto b = q;
  b.choices[3] = "Both a and b";
  CHECK(screen(b).reasons == std::vector<std::string>{"choice-both-neither"});

  auto nitrous = q;
  nitrous.choices[0] = "Nitrous oxide";
  CHECK(screen(nitrous).passed);

  auto neither = q;
  neither.choices[0] = "NEITHER, of course";
  CHECK(screen(neither).reasons == std::vector<std::string>{"choice-both-neither"});

  auto e = q;
  e.explanation = "Twelve chars";
  CHECK(screen(e).passed);
}

TEST_CASE("screen reports every violated rule") {
  auto q = corpus::make("X", "Why?", {"", "Yes", "yes", "All of the above"}, "no");
  const auto v = screening::screen(q);
  CHECK_FALSE(v.passed);
  CHECK(v.reasons == std::vector<std::string>{"stem-too-short", "choice-empty", "choice-duplicate",
                                              "choice-too-short", "choice-flawed-aota-nota",
                                              "choice-dichotomous", "explanation-too-short"});
}

TEST_CASE("screen counts Unicode scalars") {
  auto q = corpus::clean();
  q.choices[0] = "\xC3\xA9t\xC3\xA9s!";  // 5 scalars, 7 bytes
  CHECK(screening::screen(q).passed);
  q.choices[0] = "\xC3\xA9t\xC3\xA9";    // 3 scalars
  CHECK_FALSE(screening::screen(q).passed);
}

TEST_CASE("crafted corpus hits each reason exactly once") {
  const auto r = screening::filter_bank(corpus::flawed());
  CHECK(r.retained.empty());
  REQUIRE(r.rejected.size() == 9);
  std::map<std::string, int> seen;
  for (std::size_t i = 0; i < r.rejected.size(); ++i) {
    CHECK(r.rejected[i].rejection_reasons == std::vector<std::string>{corpus::kExpected[i]});
    for (const auto& reason : r.rejected[i].rejection_reasons) ++seen[reason];
  }
  for (auto code : screening::reason_codes()) CHECK(seen[std::string(code)] == 1);
}

TEST_CASE("filter_bank edge cases") {
  CHECK(screening::filter_bank({}).retained.empty());
  auto q = corpus::clean();
  auto r = screening::filter_bank({q, q});
  CHECK(r.retained.size() == 1);
  CHECK(r.rejected.size() == 1);
  CHECK(r.rejected[0].rejection_reasons == std::vector<std::string>{"dup-question"});
  CHECK(r.retained[0].stage == Stage::syntactic_pass);

  auto late = q;
  advance(late, Stage::confidence_pass);
  CHECK_THROWS_AS(screening::filter_bank({late}), Error);
}

TEST_CASE("property: filtering partitions, conserves and is idempotent") {
  gen::Source src(2024);
  for (int round = 0; round < 50; ++round) {
    std::vector<Question> qs;
    const std::size_t n = 1 + src.below(40);
    for (std::size_t i = 0; i < n; ++i) {
      auto q = src.clean_question("Q" + std::to_string(i), "L");
      switch (src.below(6)) {
        case 0: q.stem = src.word(1, 8); break;
        case 1: q.choices[src.below(4)] = src.coin() ? "true" : "Neither one"; break;
        case 2: if (!qs.empty()) { auto id = q.id; q = qs[src.below(qs.size())]; q.id = id; q.stage = Stage::generated; q.rejection_reasons.clear(); q.rejected_from.reset(); } break;
        case 3: q.explanation = src.word(1, 5); break;
        default: break;
      }
      qs.push_back(q);
    }
    const auto r = screening::filter_bank(qs);
    CHECK(r.retained.size() + r.rejected.size() == qs.size());
    std::set<std::string> ids;
    for (const auto& q : r.retained) ids.insert(q.id);
    for (const auto& q : r.rejected) {
      ids.insert(q.id);
      CHECK_FALSE(q.rejection_reasons.empty());
      CHECK(q.stage == Stage::rejected);
    }
    CHECK(ids.size() == qs.size());

    const auto again = screening::filter_bank(r.retained);
    CHECK(again.rejected.empty());
    CHECK(again.retained == r.retained);
  }
}
