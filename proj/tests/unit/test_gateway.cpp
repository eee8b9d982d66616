// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <memory>
#include <thread>

#include "doctest.h"
#include "oracles.hpp"
#include "qgen/decoding.hpp"
#include "qgen/error.hpp"
#include "qgen/gateway.hpp"
#include "qgen/mock_backend.hpp"
#include "qgen/recording_backend.hpp"

using namespace qgen;
using mock::MatchMode;
using mock::MockBackend;
using mock::Rule;
using mock::ScoringConfig;

namespace {

Rule scripted_logprobs(std::string pattern, std::map<std::string, double> lp,
                       MatchMode mode = MatchMode::contains) {
  Rule r;
  r.pattern = std::move(pattern);
  r.mode = mode;
  r.token_logprobs = std::move(lp);
  return r;
}

Rule scripted_text(std::string pattern, std::vector<std::string> completions,
                   MatchMode mode = MatchMode::contains) {
  Rule r;
  r.pattern = std::move(pattern);
  r.mode = mode;
  r.completions = std::move(completions);
  return r;
}

Gateway gateway_of(std::shared_ptr<const Backend> b, std::vector<std::string> variants = {"{label}"}) {
  GatewayOptions o;
  o.label_variants = std::move(variants);
  return Gateway(std::move(b), o);
}

ScoringConfig uniform(int vocab) {
  ScoringConfig c;
  c.base = ScoringConfig::Base::uniform;
  c.uniform_vocab = vocab;
  return c;
}

}  // namespace

TEST_CASE("mock tokenization concatenates back to the input") {
  for (const std::string s : {"", "a", "Which   method?\n a) Drip\n\n", "  x", "x  \ny", "\xC3\xA9t\xC3\xA9 ok"}) {
    std::string joined;
    for (const auto& t : mock::tokenize(s)) joined += t;
    CHECK(joined == s);
  }
  CHECK(mock::tokenize("a) Drip") == std::vector<std::string>{"a", ")", " Drip"});
  CHECK(mock::tokenize("x \n") == std::vector<std::string>{"x", " ", "\n"});
  CHECK(mock::keyword_of(" Carbon", 4) == "carbon");
  CHECK(mock::keyword_of(" the", 4).empty());
  CHECK(mock::keyword_of("?", 1).empty());
}

TEST_CASE("complete returns the scripted continuation") {
  auto m = std::make_shared<MockBackend>(ScoringConfig{}, std::vector<Rule>{scripted_text("2+2=", {"4"})});
  const Gateway g = gateway_of(m);
  const auto c = g.complete("2+2=", DecodingParams::greedy(8));
  CHECK(c.text == "4");
  CHECK(c.finish == FinishReason::end_of_text);
}

TEST_CASE("decoding params are validated") {
  auto m = std::make_shared<MockBackend>();
  const Gateway g = gateway_of(m);
  CHECK_THROWS_AS(g.complete("x", DecodingParams::greedy(0)), Error);
  CHECK_THROWS_AS(g.complete("x", DecodingParams::nucleus(1.0, 0.0, 8, 1)), Error);
  CHECK_THROWS_AS(g.complete("x", DecodingParams::beam(0, 8)), Error);
  CHECK_THROWS_AS(g.complete("", DecodingParams::greedy(4)), Error);
}

TEST_CASE("nucleus sampling on the mock is reproducible") {
  auto m = std::make_shared<MockBackend>();
  const Gateway g = gateway_of(m);
  const auto p = DecodingParams::nucleus(1.0, 0.95, 20, 1234);
  const auto a = g.complete("The carbon cycle moves", p);
  CHECK(a == g.complete("The carbon cycle moves", p));
  CHECK(!a.text.empty());

  auto q = p;
  q.seed = 99;
  const auto many = g.complete_n("The carbon cycle moves", q, 5);
  CHECK(many.size() == 5);
  CHECK(many == g.complete_n("The carbon cycle moves", q, 5));
}

TEST_CASE("generation is identical across threads") {
  auto m = std::make_shared<MockBackend>();
  const Gateway g = gateway_of(m);
  const auto p = DecodingParams::beam(3, 12);
  const auto ref = g.complete("Soil erosion is", p);
  std::vector<Completion> out(8);
  {
    std::vector<std::jthread> ts;
    for (std::size_t i = 0; i < out.size(); ++i) {
      ts.emplace_back([&, i] { out[i] = g.complete("Soil erosion is", p); });
    }
  }
  for (const auto& c : out) CHECK(c == ref);
}

TEST_CASE("stop sequences and token limits") {
  auto m = std::make_shared<MockBackend>(
      ScoringConfig{}, std::vector<Rule>{scripted_text("go", {"one two\nthree four"})});
  const Gateway g = gateway_of(m);
  auto p = DecodingParams::greedy(50);
  p.stop_sequences = {"\n"};
  auto c = g.complete("go", p);
  CHECK(c.text == "one two");
  CHECK(c.finish == FinishReason::stop_sequence);

  c = g.complete("go", DecodingParams::greedy(2));
  CHECK(c.text == "one two");
  CHECK(c.truncated());
  std::string joined;
  for (const auto& t : c.tokens) joined += t.token;
  CHECK(joined == c.text);
}

TEST_CASE("label distribution: equal scores are uniform") {
  auto m = std::make_shared<MockBackend>(uniform(4));
  const Gateway g = gateway_of(m);
  const auto d = g.label_distribution("Answer:", {"a", "b", "c", "d", "e"});
  REQUIRE(d.size() == 5);
  for (const auto& s : d) CHECK(s.probability == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("label distribution: hand softmax") {
  auto m = std::make_shared<MockBackend>(
      ScoringConfig{}, std::vector<Rule>{scripted_logprobs("Q", {{"a", 0.0}, {"b", std::log(3.0)}})});
  const Gateway g = gateway_of(m);
  const auto d = g.label_distribution("Q", {"a", "b"});
  CHECK(d[0].label == "a");
  CHECK(std::abs(d[0].probability - 0.25) < 1e-12);
  CHECK(std::abs(d[1].probability - 0.75) < 1e-12);
}

TEST_CASE("label variants pool probability mass") {
  auto m = std::make_shared<MockBackend>(
      ScoringConfig{},
      std::vector<Rule>{scripted_logprobs("Q", {{"a", std::log(0.1)}, {" a", std::log(0.3)}, {"b", std::log(0.2)}})});
  const Gateway g = gateway_of(m, {"{label}", " {label}"});
  const auto d = g.label_distribution("Q", {"a", "b"});
  CHECK(std::abs(d[0].probability - 4.0 / 6.0) < 1e-12);
  CHECK(std::abs(d[1].probability - 2.0 / 6.0) < 1e-12);
}

TEST_CASE("label distribution preconditions and errors") {
  auto m = std::make_shared<MockBackend>();
  const Gateway g = gateway_of(m);
  CHECK_THROWS_AS(g.label_distribution("Q", {}), Error);
  CHECK_THROWS_AS(g.label_distribution("Q", {"a", "a"}), Error);
  try {
    g.label_distribution("Q", {"two words"});
    FAIL("expected label_not_tokenizable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::label_not_tokenizable);
  }
  auto none = std::make_shared<MockBackend>(
      ScoringConfig{}, std::vector<Rule>{scripted_logprobs("Q", {{"z", 0.0}})});
  CHECK_THROWS_AS(gateway_of(none).label_distribution("Q", {"a", "b"}), Error);
}

TEST_CASE("label distributions are normalized for arbitrary prompts") {
  auto m = std::make_shared<MockBackend>();
  const Gateway g = gateway_of(m, {"{label}", " {label}"});
  for (int i = 0; i < 200; ++i) {
    const auto d = g.label_distribution("prompt number " + std::to_string(i) + "\nAnswer:",
                                        {"a", "b", "c", "d", "e"});
    double s = 0;
    for (const auto& x : d) s += x.probability;
    CHECK(std::abs(s - 1.0) < 1e-9);
  }
}

TEST_CASE("softmax argmax is invariant to positive scaling") {
  const std::vector<double> logits{0.3, -1.2, 2.5, 2.4, 0.0};
  for (double c : {0.5, 1.0, 3.0, 10.0}) {
    std::vector<double> scaled;
    for (double v : logits) scaled.push_back(v * c);
    const auto p = softmax(scaled);
    ChoiceDistribution d;
    for (std::size_t i = 0; i < p.size(); ++i) d.push_back({std::string(1, char('a' + i)), p[i]});
    CHECK(argmax(d) == 2);
  }
}

TEST_CASE("argmax breaks ties toward the lowest index") {
  bool tie = false;
  CHECK(argmax({{"a", 0.25}, {"b", 0.25}, {"c", 0.25}, {"d", 0.25}}, &tie) == 0);
  CHECK(tie);
  CHECK(argmax({{"a", 0.1}, {"b", 0.7}, {"c", 0.1}, {"d", 0.1}}, &tie) == 1);
  CHECK_FALSE(tie);
}

TEST_CASE("score_target on a uniform vocabulary") {
  auto m = std::make_shared<MockBackend>(uniform(4));
  const Gateway g = gateway_of(m);
  // " x y z" is three mock tokens
  CHECK(std::abs(g.score_target("prefix", " x y z") - 3 * std::log(0.25)) < 1e-12);
  CHECK_THROWS_AS(g.score_target("prefix", ""), Error);
}

TEST_CASE("score_target is the sum of stepwise scores and additive over splits") {
  ScoringConfig cfg;
  cfg.window = 6;
  cfg.keyword_boost = 1.25;
  auto m = std::make_shared<MockBackend>(cfg);
  const Gateway g = gateway_of(m);
  const std::string p = "Explain the carbon cycle.\n\n";
  const std::string t1 = "Which reservoir stores carbon";
  const std::string t2 = " for the longest time?\na) Ocean";
  const double whole = g.score_target(p, t1 + t2);
  CHECK(std::abs(whole - (g.score_target(p, t1) + g.score_target(p + t1, t2))) < 1e-6);
  CHECK(std::abs(whole - oracle::mock_sequence_logprob(*m, p, t1 + t2)) < 1e-9);
  CHECK(whole < 0);
}

TEST_CASE("score_target rejects targets that split a token") {
  auto m = std::make_shared<MockBackend>();
  try {
    m->score_tokens("carb", "on cycle");
    FAIL("expected a boundary error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::tokenization_boundary_mismatch);
  }
}

TEST_CASE("scenario files parse and validate") {
  auto m = MockBackend::from_scenario_text(R"({
    "schema_version": "1",
    "scoring": {"base": "uniform", "uniform_vocab": 8},
    "rules": [{"match": "^Q\\d$", "mode": "regex", "token_logprobs": {"a": -1, "b": null}}]
  })");
  const auto lp = m->next_token_logprobs("Q1", std::vector<std::string>{"a", "b", "c"});
  CHECK(lp[0] == -1.0);
  CHECK(std::isinf(lp[1]));
  CHECK(std::isinf(lp[2]));
  CHECK(m->next_token_logprobs("Q12", std::vector<std::string>{"a"})[0] == doctest::Approx(-std::log(8.0)));
  CHECK_THROWS_AS(MockBackend::from_scenario_text(R"({"schema_version": "9"})"), Error);
  CHECK_THROWS_AS(MockBackend::from_scenario_text("{not json"), ParseError);
  CHECK_THROWS_AS(MockBackend::from_scenario_text(R"({"rules":[{"match":"x","mode":"glob"}]})"), ParseError);
}

TEST_CASE("recording backend captures every request") {
  auto m = std::make_shared<MockBackend>(uniform(4));
  auto rec = std::make_shared<RecordingBackend>(m);
  const Gateway g = gateway_of(rec);
  g.label_distribution("first", {"a"});
  g.score_target("pre", " second");
  CHECK(rec->prompts() == std::vector<std::string>{"first", "pre second"});
}

TEST_CASE("nucleus support keeps the smallest covering prefix") {
  const std::vector<double> p{0.1, 0.5, 0.3, 0.1};
  CHECK(decoding::nucleus_support(p, 0.5, 0) == std::vector<std::size_t>{1});
  CHECK(decoding::nucleus_support(p, 0.8, 0) == std::vector<std::size_t>{1, 2});
  CHECK(decoding::nucleus_support(p, 0.85, 0) == std::vector<std::size_t>{1, 2, 0});
  CHECK(decoding::nucleus_support(p, 1.0, 2) == std::vector<std::size_t>{1, 2});
}
