// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>

#include "qgen/error.hpp"
#include "qgen/mock_backend.hpp"
#include "qgen/pipeline.hpp"
#include "qgen/text.hpp"

using namespace qgen;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("qgen_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path source_dir() { return fs::path(QGEN_SOURCE_DIR); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

PipelineConfig sample_config(std::size_t per_lo = 4) {
  auto c = PipelineConfig::from_file(source_dir() / "data" / "config_sample.json");
  c.per_lo_target = per_lo;
  return c;
}

}  // namespace

TEST_CASE("config: sample file parses with resolved paths") {
  const auto c = PipelineConfig::from_file(source_dir() / "data" / "config_sample.json");
  CHECK(c.backend == "mock");
  CHECK(c.master_seed == 20240601u);
  CHECK(c.per_lo_target == 10u);
  REQUIRE(c.mock_scenario);
  CHECK(fs::exists(*c.mock_scenario));
  REQUIRE(c.templates_file);
  CHECK(fs::exists(*c.templates_file));
  CHECK(c.http.model == "microsoft/phi-2");
  CHECK(c.generator.beam_width == 4);
  CHECK(c.alignment.scoring == alignment::Scoring::lift);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("config: unknown keys and bad values") {
  CHECK_THROWS_AS(PipelineConfig::from_json_text(R"({"bogus": 1})", "cfg"), ParseError);
  CHECK_THROWS_AS(PipelineConfig::from_json_text(R"({"generator": {"beam": 2}})", "cfg"), ParseError);
  CHECK_THROWS_AS(PipelineConfig::from_json_text(R"({"alignment": {"scoring": "ratio"}})", "cfg"),
                  ParseError);
  CHECK_THROWS_AS(PipelineConfig::from_json_text("[1,2]", "cfg"), ParseError);
  CHECK_THROWS_AS(PipelineConfig::from_json_text("{", "cfg"), ParseError);
  try {
    PipelineConfig::from_json_text(R"({"schema_version": "2"})", "cfg");
    FAIL("expected a version error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::schema_version_mismatch);
  }

  PipelineConfig c;
  c.confidence_threshold = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = PipelineConfig{};
  c.backend = "grpc";
  CHECK_THROWS_AS(c.validate(), Error);
  c = PipelineConfig{};
  c.backend = "http";
  c.http.base_url.clear();
  CHECK_THROWS_AS(c.validate(), Error);
  c = PipelineConfig{};
  c.label_variants.clear();
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("config: environment overrides") {
  PipelineConfig c;
  const std::map<std::string, std::string> env{{"QGEN_BACKEND", "http"},
                                               {"QGEN_BASE_URL", "http://h:1"},
                                               {"QGEN_API_KEY", "secret"}};
  c.apply_env([&](const char* name) -> std::optional<std::string> {
    const auto it = env.find(name);
    if (it == env.end()) return std::nullopt;
    return it->second;
  });
  CHECK(c.backend == "http");
  CHECK(c.http.base_url == "http://h:1");
  CHECK(c.http.api_key == "secret");
  CHECK(c.http.model.empty());
}

TEST_CASE("config: digest ignores credentials and tracks settings") {
  PipelineConfig a;
  a.backend = "http";
  PipelineConfig b = a;
  b.http.api_key = "another-secret";
  CHECK(a.digest() == b.digest());
  CHECK(a.to_json().find("another-secret") == std::string::npos);
  CHECK(b.to_json().find("another-secret") == std::string::npos);
  b.master_seed = 99;
  CHECK(a.digest() != b.digest());
  PipelineConfig c = a;
  c.template_overrides["nota.text"] = "None of these";
  CHECK(a.digest() != c.digest());
  CHECK(a.stage_seed("generate") != a.stage_seed("confidence"));
  CHECK(a.stage_seed("generate") == PipelineConfig{}.stage_seed("generate"));
}

TEST_CASE("stages: counts shrink and summary tallies furthest stage") {
  const auto config = sample_config(3);
  const Gateway gw = make_gateway(config);
  auto objectives = load_objectives(source_dir() / "data" / "objectives_sample.tsv");
  auto bank = stage_generate(gw, config, objectives);
  CHECK(bank.questions.size() == objectives.size() * 3);
  CHECK(bank.pipeline_config_digest == config.digest());
  for (const auto& q : bank.questions) CHECK(q.stage == Stage::generated);

  stage_filter(bank, config);
  stage_confide(gw, bank, config);
  stage_align(gw, bank, config);

  std::size_t at_least[4] = {0, 0, 0, 0};
  for (const auto& q : bank.questions) {
    const Stage reached = q.stage == Stage::rejected ? *q.rejected_from : q.stage;
    for (int k = 0; k <= stage_rank(reached) && k < 4; ++k) ++at_least[k];
    if (q.stage == Stage::rejected) CHECK_FALSE(q.rejection_reasons.empty());
  }
  const auto s = summarize(bank);
  REQUIRE(s.stages.size() == 4);
  for (int k = 0; k < 4; ++k) CHECK(s.stages[k].count == at_least[k]);
  for (int k = 1; k < 4; ++k) CHECK(s.stages[k].count <= s.stages[k - 1].count);
  CHECK(s.stages[0].percent_of_generated == doctest::Approx(100.0));
  CHECK(s.survivors_per_lo.size() == objectives.size());

  std::size_t survivors = 0;
  for (const auto& [_, n] : s.survivors_per_lo) survivors += n;
  CHECK(survivors == s.stages[3].count);

  const auto txt = summary_text(s);
  CHECK(txt.find("alignment-pass") != std::string::npos);
  CHECK(txt.find("survivors per LO") != std::string::npos);
  CHECK(summary_json(s).find("\"survivors_sd\"") != std::string::npos);
}

TEST_CASE("stages: filter is idempotent on an already screened bank") {
  const auto config = sample_config(2);
  const Gateway gw = make_gateway(config);
  auto bank = stage_generate(gw, config, load_objectives(source_dir() / "data" / "objectives_sample.tsv"));
  stage_filter(bank, config);
  const auto once = bank;
  stage_filter(bank, config);
  CHECK(bank_digest(bank) == bank_digest(once));
}

TEST_CASE("run_pipeline: same config gives byte-identical banks") {
  const auto dir = scratch("run");
  const auto config = sample_config(3);
  const auto lo = source_dir() / "data" / "objectives_sample.tsv";
  const auto s1 = run_pipeline(config, lo, dir / "one.json");
  const auto s2 = run_pipeline(config, lo, dir / "two.json");
  CHECK(slurp(dir / "one.json") == slurp(dir / "two.json"));
  CHECK(slurp(dir / "one.json.relevance.csv") == slurp(dir / "two.json.relevance.csv"));
  CHECK(summary_json(s1) == summary_json(s2));

  const auto bank = read_bank(dir / "one.json");
  CHECK(summary_json(summarize(bank)) == summary_json(s1));
}

TEST_CASE("run_pipeline: empty objectives file is a precondition error") {
  const auto dir = scratch("empty");
  {
    std::ofstream out(dir / "lo.tsv");
    out << "id\tform\ttext\tunit\ttopic\n";
  }
  try {
    run_pipeline(sample_config(), dir / "lo.tsv", dir / "bank.json");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(classify(e.code()) != ErrorClass::backend);
  }
}

TEST_CASE("reset_to_generated clears outcomes") {
  Question q;
  q.id = "x";
  q.stage = Stage::rejected;
  q.rejected_from = Stage::syntactic_pass;
  q.rejection_reasons = {"low-confidence"};
  q.confidence = ConfidenceRecord{};
  const auto r = reset_to_generated(q);
  CHECK(r.stage == Stage::generated);
  CHECK_FALSE(r.rejected_from);
  CHECK(r.rejection_reasons.empty());
  CHECK_FALSE(r.confidence);
  CHECK_FALSE(r.alignment);
}

TEST_CASE("ablation: nesting, monotonicity and CSV round trip") {
  const auto config = sample_config(4);
  const Gateway gw = make_gateway(config);
  auto bank = stage_generate(gw, config, load_objectives(source_dir() / "data" / "objectives_sample.tsv"));

  AblationOptions opt;
  opt.thresholds = {0.3, 0.5, 0.7, 0.9};
  opt.repeats = 2;
  const auto report = ablate(gw, config, bank, opt);
  CHECK(report.rows.size() == 4 * 2 * 3);
  CHECK(report.violations().empty());

  const auto parsed = parse_ablation_csv(ablation_csv(report));
  CHECK(parsed.rows == report.rows);
  CHECK(parsed.thresholds == report.thresholds);
  CHECK(parsed.repeats == report.repeats);

  const auto means = report.means();
  CHECK(means.size() == 4 * 3);
  for (const auto& m : means) {
    if (m.version == Version::A) CHECK(m.sd_retained == 0.0);
  }
  CHECK(ablation_means_csv(report).rfind("version,threshold,mean_retained", 0) == 0);
  CHECK(ablation_json(report).find("\"means\"") != std::string::npos);

  const auto again = ablate(gw, config, bank, opt);
  CHECK(ablation_csv(again) == ablation_csv(report));
}

TEST_CASE("ablation: with a judge fills kappa and agreement") {
  const auto config = sample_config(2);
  const Gateway gw = make_gateway(config);
  auto bank = stage_generate(gw, config, load_objectives(source_dir() / "data" / "objectives_sample.tsv"));
  AblationOptions opt;
  opt.thresholds = {0.5};
  opt.repeats = 1;
  opt.judge = &gw;
  const auto report = ablate(gw, config, bank, opt);
  for (const auto& row : report.rows) {
    if (row.retained == 0) continue;
    REQUIRE(row.answer_kappa);
    REQUIRE(row.alignment_agreement);
    CHECK(*row.alignment_agreement >= 0.0);
    CHECK(*row.alignment_agreement <= 1.0);
    CHECK(*row.answer_kappa <= 1.0);
  }
}

TEST_CASE("ablation: violations and bad input") {
  AblationReport r;
  r.thresholds = {0.5, 0.6};
  r.repeats = 1;
  auto row = [](Version v, double t, std::size_t n) {
    AblationRow x;
    x.version = v;
    x.threshold = t;
    x.retained = n;
    return x;
  };
  r.rows = {row(Version::A, 0.5, 10), row(Version::B, 0.5, 6), row(Version::C, 0.5, 7),
            row(Version::A, 0.6, 10), row(Version::B, 0.6, 8), row(Version::C, 0.6, 5)};
  const auto v = r.violations();
  CHECK(v.size() == 2);  // C > B at 0.5, B grows from 6 to 8

  CHECK_THROWS_AS(parse_ablation_csv("nope\n"), ParseError);
  CHECK_THROWS_AS(parse_ablation_csv(""), ParseError);
  CHECK_THROWS_AS(
      parse_ablation_csv("version,threshold,run,retained,answer_kappa,alignment_agreement\nD,0.5,0,1,,\n"),
      ParseError);
  CHECK_THROWS_AS(
      parse_ablation_csv("version,threshold,run,retained,answer_kappa,alignment_agreement\nA,x,0,1,,\n"),
      ParseError);

  const auto config = sample_config(1);
  const Gateway gw = make_gateway(config);
  QuestionBank empty;
  AblationOptions bad;
  bad.thresholds = {0.5, 0.4};
  CHECK_THROWS_AS(ablate(gw, config, empty, bad), Error);
  bad.thresholds = {1.0};
  CHECK_THROWS_AS(ablate(gw, config, empty, bad), Error);
  bad.thresholds = {0.5};
  bad.repeats = 0;
  CHECK_THROWS_AS(ablate(gw, config, empty, bad), Error);
}

TEST_CASE("default thresholds") {
  const auto t = default_thresholds();
  REQUIRE(t.size() == 16);
  CHECK(t.front() == doctest::Approx(0.2));
  CHECK(t.back() == doctest::Approx(0.95));
}

TEST_CASE("stages: skipping a stage is a precondition error") {
  const auto config = sample_config(1);
  const Gateway gw = make_gateway(config);
  auto bank = stage_generate(gw, config, load_objectives(source_dir() / "data" / "objectives_sample.tsv"));
  try {
    stage_confide(gw, bank, config);
    FAIL("expected a precondition error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::precondition);
  }
  stage_filter(bank, config);
  CHECK_THROWS_AS(stage_align(gw, bank, config), Error);
}
