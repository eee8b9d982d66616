// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "qgen/agreement.hpp"
#include "qgen/error.hpp"
#include "qgen/judge.hpp"
#include "qgen/pipeline.hpp"

namespace fs = std::filesystem;
using namespace qgen;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitBackend = 2;
constexpr int kExitData = 3;

struct Overrides {
  std::optional<std::string> config;
  std::optional<std::string> backend;
  std::optional<std::string> base_url;
  std::optional<std::string> model;
  std::optional<std::string> scenario;
  std::optional<std::string> templates;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> concurrency;
  std::optional<std::size_t> per_lo;
  std::optional<std::size_t> choices;
  std::optional<std::size_t> batch_size;
  std::optional<int> beam_width;
  std::optional<double> threshold;
};

void add_backend_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "Pipeline config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--backend", o.backend, "mock or http");
  cmd->add_option("--base-url", o.base_url, "HTTP backend base URL");
  cmd->add_option("--model", o.model, "HTTP backend model name");
  cmd->add_option("--scenario", o.scenario, "Mock scenario file")->check(CLI::ExistingFile);
  cmd->add_option("--templates", o.templates, "Prompt template file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--concurrency", o.concurrency, "Concurrent backend requests");
}

void add_generation_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--per-lo", o.per_lo, "Questions generated per LO");
  cmd->add_option("--choices", o.choices, "Answer choices per question");
  cmd->add_option("--batch-size", o.batch_size, "Stems sampled per request");
  cmd->add_option("--beam-width", o.beam_width, "Beam width for choices");
}

PipelineConfig load_config(const Overrides& o) {
  PipelineConfig c = o.config ? PipelineConfig::from_file(*o.config) : PipelineConfig{};
  c.apply_env();
  if (o.backend) c.backend = *o.backend;
  if (o.base_url) c.http.base_url = *o.base_url;
  if (o.model) c.http.model = *o.model;
  if (o.scenario) c.mock_scenario = fs::path(*o.scenario);
  if (o.templates) c.templates_file = fs::path(*o.templates);
  if (o.seed) c.master_seed = *o.seed;
  if (o.concurrency) c.concurrency = *o.concurrency;
  if (o.per_lo) c.per_lo_target = *o.per_lo;
  if (o.choices) c.generator.choices_k = *o.choices;
  if (o.batch_size) c.generator.batch_size = *o.batch_size;
  if (o.beam_width) c.generator.beam_width = *o.beam_width;
  if (o.threshold) c.confidence_threshold = *o.threshold;
  c.validate();
  return c;
}

void print_counts(const QuestionBank& bank) {
  std::cout << summary_text(summarize(bank));
}

int exit_code_for(const Error& e) {
  switch (classify(e.code())) {
    case ErrorClass::usage: return kExitUsage;
    case ErrorClass::backend: return kExitBackend;
    case ErrorClass::data: return kExitData;
  }
  return kExitData;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate and validate multiple-choice questions from learning objectives"};
  app.require_subcommand(1);
  bool verbose = false;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Only log errors");

  Overrides o;
  std::string los, bank_in, out, matrix_out, summary_json_out, eval_in, judge_id = "model";
  std::vector<std::string> record_files, machines;
  std::string field = "answer", json_out, csv_out, heatmap_out, means_out, judge_config;
  std::size_t n_los = 8, per_lo_eval = 8, repeats = 10;
  std::uint64_t eval_seed = 0;
  std::vector<double> thresholds;
  bool pipeline_judge = false;

  auto* generate = app.add_subcommand("generate", "Generate candidate questions");
  add_backend_options(generate, o);
  add_generation_options(generate, o);
  generate->add_option("--los", los, "Learning objectives (.tsv or .csv)")->required()->check(CLI::ExistingFile);
  generate->add_option("--out", out, "Output bank")->required();

  auto* filter = app.add_subcommand("filter", "Apply the syntactic filter");
  add_backend_options(filter, o);
  filter->add_option("--bank", bank_in, "Input bank")->required()->check(CLI::ExistingFile);
  filter->add_option("--out", out, "Output bank")->required();

  auto* confide = app.add_subcommand("confide", "Answer-confidence validation");
  add_backend_options(confide, o);
  confide->add_option("--bank", bank_in, "Input bank")->required()->check(CLI::ExistingFile);
  confide->add_option("--out", out, "Output bank")->required();
  confide->add_option("--threshold", o.threshold, "Probability threshold");

  auto* align = app.add_subcommand("align", "Learning-objective alignment check");
  add_backend_options(align, o);
  align->add_option("--bank", bank_in, "Input bank")->required()->check(CLI::ExistingFile);
  align->add_option("--out", out, "Output bank")->required();
  align->add_option("--matrix", matrix_out, "Relevance matrix CSV");

  auto* run = app.add_subcommand("run", "All stages: generate, filter, confide, align");
  add_backend_options(run, o);
  add_generation_options(run, o);
  run->add_option("--los", los, "Learning objectives (.tsv or .csv)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Output bank")->required();
  run->add_option("--threshold", o.threshold, "Confidence threshold");
  run->add_option("--summary-json", summary_json_out, "Stage summary as JSON");

  auto* eval_set = app.add_subcommand("eval-set", "Build a balanced control/treatment evaluation set");
  eval_set->add_option("--bank", bank_in, "Bank with alignment-pass questions")->required()->check(CLI::ExistingFile);
  eval_set->add_option("--out", out, "Output evaluation set (JSON)")->required();
  eval_set->add_option("--n-los", n_los, "LOs to sample");
  eval_set->add_option("--per-lo", per_lo_eval, "Questions per LO (even)");
  eval_set->add_option("--seed", eval_seed, "Sampling seed");

  auto* judge = app.add_subcommand("judge", "Run a model judge over an evaluation set");
  add_backend_options(judge, o);
  judge->add_option("--bank", bank_in, "Bank")->required()->check(CLI::ExistingFile);
  judge->add_option("--eval-set", eval_in, "Evaluation set")->required()->check(CLI::ExistingFile);
  judge->add_option("--out", out, "Judgment records (.jsonl)")->required();
  judge->add_option("--judge-id", judge_id, "Judge identifier");
  judge->add_flag("--pipeline", pipeline_judge,
                  "Emit the generating pipeline's own answers and alignment instead of querying a model");

  auto* metrics = app.add_subcommand("metrics", "Agreement report over judgment records");
  metrics->add_option("--records", record_files, "Judgment record files")->required()->check(CLI::ExistingFile);
  metrics->add_option("--machine", machines, "Judge ids to treat as machines");
  metrics->add_option("--field", field, "answer or alignment")->check(CLI::IsMember({"answer", "alignment"}));
  metrics->add_option("--json", json_out, "Report JSON");
  metrics->add_option("--csv", csv_out, "Report CSV");
  metrics->add_option("--heatmap", heatmap_out, "Pairwise kappa grid CSV");

  auto* ablate_cmd = app.add_subcommand("ablate", "Threshold ablation over versions A/B/C");
  add_backend_options(ablate_cmd, o);
  ablate_cmd->add_option("--bank", bank_in, "Bank with generated questions")->required()->check(CLI::ExistingFile);
  ablate_cmd->add_option("--out", out, "Per-run CSV")->required();
  ablate_cmd->add_option("--means", means_out, "Per-threshold means CSV");
  ablate_cmd->add_option("--json", json_out, "Report JSON");
  ablate_cmd->add_option("--repeats", repeats, "Repeated runs");
  ablate_cmd->add_option("--thresholds", thresholds, "Thresholds (default 0.20..0.95 step 0.05)")->delimiter(',');
  ablate_cmd->add_option("--judge-config", judge_config, "Config for a surrogate judge backend")
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  // Logs go to stderr; stdout carries reports only.
  spdlog::set_default_logger(spdlog::stderr_color_mt("qgen"));
  spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::err : spdlog::level::info);
  spdlog::set_pattern("[%l] %v");

  try {
    if (*generate) {
      const auto config = load_config(o);
      const Gateway gateway = make_gateway(config);
      auto bank = stage_generate(gateway, config, load_objectives(los));
      write_bank(bank, out);
      print_counts(bank);
    } else if (*filter) {
      const auto config = load_config(o);
      auto bank = read_bank(bank_in);
      stage_filter(bank, config);
      write_bank(bank, out);
      print_counts(bank);
    } else if (*confide) {
      const auto config = load_config(o);
      const Gateway gateway = make_gateway(config);
      auto bank = read_bank(bank_in);
      stage_confide(gateway, bank, config);
      write_bank(bank, out);
      print_counts(bank);
    } else if (*align) {
      const auto config = load_config(o);
      const Gateway gateway = make_gateway(config);
      auto bank = read_bank(bank_in);
      const auto matrix = stage_align(gateway, bank, config);
      write_bank(bank, out);
      if (!matrix_out.empty()) alignment::write_matrix_csv(matrix, matrix_out);
      print_counts(bank);
    } else if (*run) {
      const auto config = load_config(o);
      const auto summary = run_pipeline(config, los, out);
      std::cout << summary_text(summary);
      if (!summary_json_out.empty()) write_text_file(summary_json_out, summary_json(summary));
    } else if (*eval_set) {
      const auto bank = read_bank(bank_in);
      const auto set = judge::build_eval_set(bank, n_los, per_lo_eval, eval_seed);
      judge::write_eval_set(set, out);
      std::cout << fmt::format("{} items over {} LOs\n", set.items.size(), set.lo_ids.size());
    } else if (*judge) {
      const auto bank = read_bank(bank_in);
      const auto set = judge::read_eval_set(eval_in);
      std::vector<judge::JudgmentRecord> records;
      if (pipeline_judge) {
        records = judge::pipeline_judgments(judge_id, set, bank);
      } else {
        const auto config = load_config(o);
        const Gateway gateway = make_gateway(config);
        records = judge::run_judge(gateway, judge_id, set, bank, make_templates(config));
      }
      judge::write_records(records, out);
      std::cout << fmt::format("{} judgments by {}\n", records.size(), judge_id);
    } else if (*metrics) {
      std::vector<judge::JudgmentRecord> records;
      for (const auto& f : record_files) {
        auto part = judge::read_records(f);
        records.insert(records.end(), part.begin(), part.end());
      }
      const auto f = agreement::parse_field(field);
      const auto table = agreement::RatingTable::from_records(records, f);
      const auto report = agreement::report(table, machines, f);
      if (!json_out.empty()) write_text_file(json_out, agreement::report_json(report));
      if (!csv_out.empty()) write_text_file(csv_out, agreement::report_csv(report));
      if (!heatmap_out.empty()) write_text_file(heatmap_out, agreement::heatmap_csv(report));
      std::cout << agreement::report_csv(report);
    } else if (*ablate_cmd) {
      const auto config = load_config(o);
      const Gateway gateway = make_gateway(config);
      const auto bank = read_bank(bank_in);
      AblationOptions options;
      if (!thresholds.empty()) options.thresholds = thresholds;
      options.repeats = repeats;
      std::optional<Gateway> judge_gateway;
      if (!judge_config.empty()) {
        auto jc = PipelineConfig::from_file(judge_config);
        jc.apply_env();
        jc.validate();
        judge_gateway.emplace(make_gateway(jc));
        options.judge = &*judge_gateway;
      }
      const auto report = ablate(gateway, config, bank, options);
      write_text_file(out, ablation_csv(report));
      if (!means_out.empty()) write_text_file(means_out, ablation_means_csv(report));
      if (!json_out.empty()) write_text_file(json_out, ablation_json(report));
      std::cout << ablation_means_csv(report);
      for (const auto& v : report.violations()) spdlog::warn("ablation invariant: {}", v);
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitData;
  }
  return 0;
}
