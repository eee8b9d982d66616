// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file pipeline.hpp
 * @brief Configuration, stage orchestration and the threshold ablation.
 *
 * Stages read and write whole banks so each one can be resumed or audited on
 * its own. Every stochastic stage draws its seed from the master seed and a
 * fixed stage name.
 */

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qgen/alignment.hpp"
#include "qgen/gateway.hpp"
#include "qgen/generator.hpp"
#include "qgen/http_backend.hpp"
#include "qgen/question_bank.hpp"
#include "qgen/syntactic_filter.hpp"
#include "qgen/templates.hpp"

namespace qgen {

struct PipelineConfig {
  std::string backend = "mock";  // "mock" | "http"
  std::optional<std::filesystem::path> mock_scenario;
  HttpBackendConfig http;
  std::vector<std::string> label_variants{"{label}", " {label}"};
  std::size_t concurrency = 4;

  std::size_t per_lo_target = 200;
  GeneratorConfig generator;
  screening::Thresholds syntactic;
  double confidence_threshold = 0.9;
  alignment::Options alignment;
  std::uint64_t master_seed = 0;

  std::optional<std::filesystem::path> templates_file;
  std::map<std::string, std::string> template_overrides;

  /// Relative paths inside the JSON resolve against `base_dir`.
  static PipelineConfig from_json_text(std::string_view text, const std::string& source,
                                       const std::filesystem::path& base_dir = {});
  static PipelineConfig from_file(const std::filesystem::path& path);

  using EnvLookup = std::function<std::optional<std::string>(const char*)>;
  /// QGEN_BACKEND, QGEN_BASE_URL, QGEN_API_KEY, QGEN_MODEL.
  void apply_env(const EnvLookup& lookup);
  void apply_env();

  void validate() const;
  /// Canonical JSON without credentials; referenced files appear as content
  /// digests so the result does not depend on where they live.
  std::string to_json() const;
  std::string digest() const;

  std::uint64_t stage_seed(std::string_view stage) const;
};

std::shared_ptr<const Backend> make_backend(const PipelineConfig& config);
Gateway make_gateway(const PipelineConfig& config);
TemplateSet make_templates(const PipelineConfig& config);

// ---------------------------------------------------------------------------
// Stages. Each works in place on the bank and leaves bank order unchanged.

QuestionBank stage_generate(const Gateway& gateway, const PipelineConfig& config,
                            std::vector<LearningObjective> objectives);
/// Screens questions at generated (or syntactic-pass, re-screened unchanged).
void stage_filter(QuestionBank& bank, const PipelineConfig& config);
void stage_confide(const Gateway& gateway, QuestionBank& bank, const PipelineConfig& config);
/// Returns the relevance matrix over the bank's objectives.
alignment::RelevanceMatrix stage_align(const Gateway& gateway, QuestionBank& bank,
                                       const PipelineConfig& config);

struct StageCount {
  std::string stage;
  std::size_t count = 0;
  double percent_of_generated = 0.0;
  double percent_of_previous = 0.0;
};

struct StageSummary {
  std::vector<StageCount> stages;  // generated, syntactic-pass, confidence-pass, alignment-pass
  std::map<std::string, std::size_t> rejection_reasons;
  std::map<std::string, std::size_t> survivors_per_lo;
  double survivors_mean = 0.0;
  double survivors_sd = 0.0;
};

/// Counts each question at the furthest stage it reached, so a question
/// rejected during confidence validation still counts as syntactic-pass.
StageSummary summarize(const QuestionBank& bank);
std::string summary_text(const StageSummary& s);
std::string summary_json(const StageSummary& s);

/// generate -> filter -> confide -> align, writing the bank after every stage
/// (and the relevance matrix next to it as <bank>.relevance.csv).
StageSummary run_pipeline(const PipelineConfig& config, const std::filesystem::path& lo_file,
                          const std::filesystem::path& out_bank);

/// Clears every validation outcome so the question is back at generated.
Question reset_to_generated(Question q);

// ---------------------------------------------------------------------------
// Ablation

enum class Version { A, B, C };
std::string_view to_string(Version v);
Version parse_version(std::string_view s);

struct AblationRow {
  Version version = Version::A;
  double threshold = 0.0;
  std::size_t run = 0;
  std::size_t retained = 0;
  /// Cohen's kappa between the stored answers and the judge's answers on the
  /// retained questions.
  std::optional<double> answer_kappa;
  /// Share of retained questions the judge accepts for their origin LO.
  std::optional<double> alignment_agreement;

  bool operator==(const AblationRow&) const = default;
};

struct AblationMean {
  Version version = Version::A;
  double threshold = 0.0;
  double mean_retained = 0.0;
  double sd_retained = 0.0;
  std::optional<double> mean_answer_kappa;
  std::optional<double> mean_alignment_agreement;
};

struct AblationReport {
  std::vector<double> thresholds;
  std::size_t repeats = 0;
  std::vector<AblationRow> rows;  // run-major, then threshold, then A/B/C

  std::vector<AblationMean> means() const;
  /// Human-readable violations of C <= B <= A and of threshold monotonicity.
  std::vector<std::string> violations() const;
};

/// 0.20, 0.25, ..., 0.95.
std::vector<double> default_thresholds();

struct AblationOptions {
  std::vector<double> thresholds = default_thresholds();
  std::size_t repeats = 10;
  /// Optional surrogate judge.
  const Gateway* judge = nullptr;
};

/// Version A is the syntactic filter over the bank's questions (reset to
/// generated). For every repeat, confidence distributions are computed once
/// with that repeat's seed and thresholded per cell; alignment is computed
/// once since it does not depend on the confidence seed.
AblationReport ablate(const Gateway& gateway, const PipelineConfig& config,
                      const QuestionBank& bank, const AblationOptions& options);

std::string ablation_csv(const AblationReport& r);
AblationReport parse_ablation_csv(std::string_view content, const std::string& source = "ablation");
std::string ablation_means_csv(const AblationReport& r);
std::string ablation_json(const AblationReport& r);

}  // namespace qgen
