// SPDX-License-Identifier: Apache-2.0
#include "qgen/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <set>
#include <tuple>
#include <unordered_map>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"
#include "qgen/agreement.hpp"
#include "qgen/confidence.hpp"
#include "qgen/error.hpp"
#include "qgen/judge.hpp"
#include "qgen/mock_backend.hpp"
#include "qgen/parallel.hpp"
#include "qgen/seeding.hpp"
#include "qgen/text.hpp"

namespace qgen {

using json = nlohmann::json;

namespace {

constexpr std::string_view kConfigVersion = "1";

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "schema_version", "backend",       "mock",       "http",
      "label_variants", "concurrency",   "per_lo_target", "generator",
      "syntactic",      "confidence_threshold", "alignment", "seed",
      "templates"};
  return keys;
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where,
                    const std::string& source) {
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw ParseError(source, 0, "unknown key '" + key + "' in " + where);
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path;
}

template <class T>
void read_opt(const json& obj, const char* key, T& out) {
  if (obj.contains(key) && !obj.at(key).is_null()) out = obj.at(key).get<T>();
}

}  // namespace

PipelineConfig PipelineConfig::from_json_text(std::string_view text, const std::string& source,
                                              const std::filesystem::path& base_dir) {
  PipelineConfig c;
  try {
    const json doc = json::parse(text);
    if (!doc.is_object()) throw ParseError(source, 0, "config must be a JSON object");
    reject_unknown(doc, known_keys(), "config", source);
    if (doc.contains("schema_version") && doc["schema_version"].get<std::string>() != kConfigVersion) {
      throw Error(ErrorCode::schema_version_mismatch,
                  fmt::format("{}: config version {} (expected {})", source,
                              doc["schema_version"].get<std::string>(), kConfigVersion));
    }
    read_opt(doc, "backend", c.backend);
    if (doc.contains("mock")) {
      const auto& m = doc["mock"];
      reject_unknown(m, {"scenario"}, "mock", source);
      if (m.contains("scenario")) c.mock_scenario = resolve(base_dir, m["scenario"].get<std::string>());
    }
    if (doc.contains("http")) {
      const auto& h = doc["http"];
      reject_unknown(h, {"base_url", "path", "model", "api_key", "timeout_seconds",
                         "supports_beam_search", "document_start"},
                     "http", source);
      read_opt(h, "base_url", c.http.base_url);
      read_opt(h, "path", c.http.path);
      read_opt(h, "model", c.http.model);
      read_opt(h, "api_key", c.http.api_key);
      read_opt(h, "timeout_seconds", c.http.timeout_seconds);
      read_opt(h, "supports_beam_search", c.http.supports_beam_search);
      read_opt(h, "document_start", c.http.document_start);
    }
    read_opt(doc, "label_variants", c.label_variants);
    read_opt(doc, "concurrency", c.concurrency);
    read_opt(doc, "per_lo_target", c.per_lo_target);
    if (doc.contains("generator")) {
      const auto& g = doc["generator"];
      reject_unknown(g, {"choices_k", "batch_size", "beam_width", "stem_temperature", "stem_top_p",
                         "stem_max_tokens", "choice_max_tokens", "explanation_max_tokens",
                         "explanation_stops", "max_empty_batches"},
                     "generator", source);
      auto& gc = c.generator;
      read_opt(g, "choices_k", gc.choices_k);
      read_opt(g, "batch_size", gc.batch_size);
      read_opt(g, "beam_width", gc.beam_width);
      read_opt(g, "stem_temperature", gc.stem_temperature);
      read_opt(g, "stem_top_p", gc.stem_top_p);
      read_opt(g, "stem_max_tokens", gc.stem_max_tokens);
      read_opt(g, "choice_max_tokens", gc.choice_max_tokens);
      read_opt(g, "explanation_max_tokens", gc.explanation_max_tokens);
      read_opt(g, "explanation_stops", gc.explanation_stops);
      read_opt(g, "max_empty_batches", gc.max_empty_batches);
    }
    if (doc.contains("syntactic")) {
      const auto& s = doc["syntactic"];
      reject_unknown(s, {"min_stem_chars", "min_choice_chars", "min_explanation_chars"}, "syntactic",
                     source);
      read_opt(s, "min_stem_chars", c.syntactic.min_stem_chars);
      read_opt(s, "min_choice_chars", c.syntactic.min_choice_chars);
      read_opt(s, "min_explanation_chars", c.syntactic.min_explanation_chars);
    }
    read_opt(doc, "confidence_threshold", c.confidence_threshold);
    if (doc.contains("alignment")) {
      const auto& a = doc["alignment"];
      reject_unknown(a, {"scoring", "length_normalized"}, "alignment", source);
      if (a.contains("scoring")) {
        const auto s = a["scoring"].get<std::string>();
        if (s == "lift") {
          c.alignment.scoring = alignment::Scoring::lift;
        } else if (s == "conditional-only") {
          c.alignment.scoring = alignment::Scoring::conditional_only;
        } else {
          throw ParseError(source, 0, "alignment.scoring must be lift or conditional-only");
        }
      }
      read_opt(a, "length_normalized", c.alignment.length_normalized);
    }
    read_opt(doc, "seed", c.master_seed);
    if (doc.contains("templates")) {
      const auto& t = doc["templates"];
      reject_unknown(t, {"file", "overrides"}, "templates", source);
      if (t.contains("file")) c.templates_file = resolve(base_dir, t["file"].get<std::string>());
      read_opt(t, "overrides", c.template_overrides);
    }
  } catch (const json::exception& e) {
    throw ParseError(source, 0, e.what());
  }
  return c;
}

PipelineConfig PipelineConfig::from_file(const std::filesystem::path& path) {
  return from_json_text(read_text_file(path), path.string(), path.parent_path());
}

void PipelineConfig::apply_env(const EnvLookup& lookup) {
  if (auto v = lookup("QGEN_BACKEND")) backend = *v;
  if (auto v = lookup("QGEN_BASE_URL")) http.base_url = *v;
  if (auto v = lookup("QGEN_API_KEY")) http.api_key = *v;
  if (auto v = lookup("QGEN_MODEL")) http.model = *v;
}

void PipelineConfig::apply_env() {
  apply_env([](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
  });
}

void PipelineConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::precondition, m); };
  if (backend != "mock" && backend != "http") fail("backend must be mock or http, got '" + backend + "'");
  if (backend == "http" && http.base_url.empty()) fail("http backend needs a base_url");
  if (per_lo_target == 0) fail("per_lo_target must be positive");
  if (!(confidence_threshold > 0.0 && confidence_threshold < 1.0)) {
    fail("confidence_threshold must be in (0, 1)");
  }
  if (label_variants.empty()) fail("label_variants must be non-empty");
  generator.validate();
}

std::string PipelineConfig::to_json() const {
  json doc;
  doc["schema_version"] = kConfigVersion;
  doc["backend"] = backend;
  if (backend == "mock") {
    doc["mock"] = {{"scenario_digest", mock_scenario ? content_digest(read_text_file(*mock_scenario))
                                                     : std::string()}};
  } else {
    doc["http"] = {{"base_url", http.base_url},
                   {"path", http.path},
                   {"model", http.model},
                   {"supports_beam_search", http.supports_beam_search},
                   {"document_start", http.document_start}};
  }
  doc["label_variants"] = label_variants;
  doc["per_lo_target"] = per_lo_target;
  doc["generator"] = {{"choices_k", generator.choices_k},
                      {"batch_size", generator.batch_size},
                      {"beam_width", generator.beam_width},
                      {"stem_temperature", generator.stem_temperature},
                      {"stem_top_p", generator.stem_top_p},
                      {"stem_max_tokens", generator.stem_max_tokens},
                      {"choice_max_tokens", generator.choice_max_tokens},
                      {"explanation_max_tokens", generator.explanation_max_tokens},
                      {"explanation_stops", generator.explanation_stops},
                      {"max_empty_batches", generator.max_empty_batches}};
  doc["syntactic"] = {{"min_stem_chars", syntactic.min_stem_chars},
                      {"min_choice_chars", syntactic.min_choice_chars},
                      {"min_explanation_chars", syntactic.min_explanation_chars}};
  doc["confidence_threshold"] = confidence_threshold;
  doc["alignment"] = {
      {"scoring", alignment.scoring == alignment::Scoring::lift ? "lift" : "conditional-only"},
      {"length_normalized", alignment.length_normalized}};
  doc["seed"] = master_seed;
  doc["templates_digest"] = make_templates(*this).digest();
  return doc.dump();
}

std::string PipelineConfig::digest() const { return content_digest(to_json()); }

std::uint64_t PipelineConfig::stage_seed(std::string_view stage) const {
  return derive_seed(master_seed, stage);
}

std::shared_ptr<const Backend> make_backend(const PipelineConfig& config) {
  if (config.backend == "mock") {
    if (config.mock_scenario) return mock::MockBackend::from_scenario_file(*config.mock_scenario);
    return std::make_shared<mock::MockBackend>();
  }
  if (config.backend == "http") return std::make_shared<HttpBackend>(config.http);
  throw Error(ErrorCode::precondition, "unknown backend '" + config.backend + "'");
}

Gateway make_gateway(const PipelineConfig& config) {
  GatewayOptions opts;
  opts.label_variants = config.label_variants;
  opts.concurrency = config.concurrency;
  return Gateway(make_backend(config), opts);
}

TemplateSet make_templates(const PipelineConfig& config) {
  TemplateSet t = config.templates_file ? TemplateSet::from_file(*config.templates_file)
                                        : TemplateSet::defaults();
  for (const auto& [k, v] : config.template_overrides) t.set(k, v);
  return t;
}

// ---------------------------------------------------------------------------
// Stages

namespace {

std::vector<std::size_t> indices_at(const QuestionBank& bank, std::initializer_list<Stage> stages) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < bank.questions.size(); ++i) {
    if (std::find(stages.begin(), stages.end(), bank.questions[i].stage) != stages.end()) {
      out.push_back(i);
    }
  }
  return out;
}

std::vector<Question> gather(const QuestionBank& bank, const std::vector<std::size_t>& idx) {
  std::vector<Question> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(bank.questions[i]);
  return out;
}

void require_none_at(const QuestionBank& bank, std::initializer_list<Stage> stages,
                     std::string_view step) {
  const auto early = indices_at(bank, stages);
  if (early.empty()) return;
  throw Error(ErrorCode::precondition,
              fmt::format("{}: question {} is at {}; run the earlier stages first", step,
                          bank.questions[early.front()].id,
                          to_string(bank.questions[early.front()].stage)));
}

void scatter(QuestionBank& bank, std::vector<Question> updated) {
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < bank.questions.size(); ++i) pos.emplace(bank.questions[i].id, i);
  for (auto& q : updated) bank.questions[pos.at(q.id)] = std::move(q);
}

}  // namespace

QuestionBank stage_generate(const Gateway& gateway, const PipelineConfig& config,
                            std::vector<LearningObjective> objectives) {
  Generator generator(gateway, make_templates(config), config.generator);
  QuestionBank bank;
  bank.questions = generator.generate(objectives, config.per_lo_target, config.stage_seed("generate"));
  bank.objectives = std::move(objectives);
  bank.pipeline_config_digest = config.digest();
  bank.validate();
  return bank;
}

void stage_filter(QuestionBank& bank, const PipelineConfig& config) {
  const auto idx = indices_at(bank, {Stage::generated, Stage::syntactic_pass});
  auto result = screening::filter_bank(gather(bank, idx), config.syntactic);
  scatter(bank, std::move(result.retained));
  scatter(bank, std::move(result.rejected));
}

void stage_confide(const Gateway& gateway, QuestionBank& bank, const PipelineConfig& config) {
  require_none_at(bank, {Stage::generated}, "confidence validation");
  const auto idx = indices_at(bank, {Stage::syntactic_pass});
  auto subset = gather(bank, idx);
  confidence::validate(gateway, subset, config.confidence_threshold, config.stage_seed("confidence"),
                       make_templates(config));
  scatter(bank, std::move(subset));
}

alignment::RelevanceMatrix stage_align(const Gateway& gateway, QuestionBank& bank,
                                       const PipelineConfig& config) {
  require_none_at(bank, {Stage::generated, Stage::syntactic_pass}, "alignment check");
  const auto idx = indices_at(bank, {Stage::confidence_pass});
  auto result = alignment::align_filter(gateway, gather(bank, idx), bank.objectives,
                                        make_templates(config), config.alignment);
  scatter(bank, std::move(result.retained));
  scatter(bank, std::move(result.rejected));
  return std::move(result.matrix);
}

namespace {

int furthest_rank(const Question& q) {
  if (q.stage != Stage::rejected) return stage_rank(q.stage);
  return q.rejected_from ? stage_rank(*q.rejected_from) : 0;
}

}  // namespace

StageSummary summarize(const QuestionBank& bank) {
  StageSummary s;
  const Stage order[] = {Stage::generated, Stage::syntactic_pass, Stage::confidence_pass,
                         Stage::alignment_pass};
  std::size_t counts[4] = {0, 0, 0, 0};
  for (const auto& q : bank.questions) {
    const int r = furthest_rank(q);
    for (int k = 0; k <= r && k < 4; ++k) ++counts[k];
    for (const auto& reason : q.rejection_reasons) ++s.rejection_reasons[reason];
  }
  for (int k = 0; k < 4; ++k) {
    StageCount c;
    c.stage = std::string(to_string(order[k]));
    c.count = counts[k];
    c.percent_of_generated = counts[0] ? 100.0 * static_cast<double>(counts[k]) / static_cast<double>(counts[0]) : 0.0;
    const std::size_t prev = k ? counts[k - 1] : counts[0];
    c.percent_of_previous = prev ? 100.0 * static_cast<double>(counts[k]) / static_cast<double>(prev) : 0.0;
    s.stages.push_back(c);
  }
  for (const auto& lo : bank.objectives) s.survivors_per_lo[lo.id] = 0;
  for (const auto& q : bank.questions) {
    if (q.stage == Stage::alignment_pass) ++s.survivors_per_lo[q.origin_lo];
  }
  const std::size_t n = s.survivors_per_lo.size();
  if (n > 0) {
    double sum = 0.0;
    for (const auto& [_, v] : s.survivors_per_lo) sum += static_cast<double>(v);
    s.survivors_mean = sum / static_cast<double>(n);
    if (n > 1) {
      double ss = 0.0;
      for (const auto& [_, v] : s.survivors_per_lo) {
        ss += (static_cast<double>(v) - s.survivors_mean) * (static_cast<double>(v) - s.survivors_mean);
      }
      s.survivors_sd = std::sqrt(ss / static_cast<double>(n - 1));
    }
  }
  return s;
}

std::string summary_text(const StageSummary& s) {
  std::string out = fmt::format("{:<16} {:>8} {:>12} {:>12}\n", "stage", "count", "% generated",
                                "% previous");
  for (const auto& c : s.stages) {
    out += fmt::format("{:<16} {:>8} {:>11.1f}% {:>11.1f}%\n", c.stage, c.count,
                       c.percent_of_generated, c.percent_of_previous);
  }
  out += fmt::format("survivors per LO: mean {:.2f} (SD = {:.2f}) over {} LOs\n", s.survivors_mean,
                     s.survivors_sd, s.survivors_per_lo.size());
  if (!s.rejection_reasons.empty()) {
    out += "rejection reasons:\n";
    for (const auto& [reason, n] : s.rejection_reasons) out += fmt::format("  {:<26} {}\n", reason, n);
  }
  return out;
}

std::string summary_json(const StageSummary& s) {
  json stages = json::array();
  for (const auto& c : s.stages) {
    stages.push_back({{"stage", c.stage},
                      {"count", c.count},
                      {"percent_of_generated", c.percent_of_generated},
                      {"percent_of_previous", c.percent_of_previous}});
  }
  json doc = {{"stages", stages},
              {"rejection_reasons", s.rejection_reasons},
              {"survivors_per_lo", s.survivors_per_lo},
              {"survivors_mean", s.survivors_mean},
              {"survivors_sd", s.survivors_sd}};
  return doc.dump(2) + "\n";
}

StageSummary run_pipeline(const PipelineConfig& config, const std::filesystem::path& lo_file,
                          const std::filesystem::path& out_bank) {
  config.validate();
  auto objectives = load_objectives(lo_file);
  if (objectives.empty()) throw Error(ErrorCode::precondition, "no learning objectives in " + lo_file.string());
  const Gateway gateway = make_gateway(config);

  QuestionBank bank = stage_generate(gateway, config, std::move(objectives));
  write_bank(bank, out_bank);
  spdlog::info("generated {} questions", bank.questions.size());

  stage_filter(bank, config);
  write_bank(bank, out_bank);
  stage_confide(gateway, bank, config);
  write_bank(bank, out_bank);
  const auto matrix = stage_align(gateway, bank, config);
  write_bank(bank, out_bank);
  alignment::write_matrix_csv(matrix, out_bank.string() + ".relevance.csv");

  const auto summary = summarize(bank);
  for (const auto& c : summary.stages) spdlog::info("{}: {}", c.stage, c.count);
  return summary;
}

Question reset_to_generated(Question q) {
  q.stage = Stage::generated;
  q.rejection_reasons.clear();
  q.rejected_from.reset();
  q.confidence.reset();
  q.alignment.reset();
  return q;
}

// ---------------------------------------------------------------------------
// Ablation

std::string_view to_string(Version v) {
  switch (v) {
    case Version::A: return "A";
    case Version::B: return "B";
    case Version::C: return "C";
  }
  return "?";
}

Version parse_version(std::string_view s) {
  if (s == "A") return Version::A;
  if (s == "B") return Version::B;
  if (s == "C") return Version::C;
  throw Error(ErrorCode::parse_error, fmt::format("unknown version '{}'", s));
}

std::vector<double> default_thresholds() {
  std::vector<double> t;
  for (int pct = 20; pct <= 95; pct += 5) t.push_back(pct / 100.0);
  return t;
}

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

std::vector<AblationMean> AblationReport::means() const {
  std::vector<AblationMean> out;
  for (double t : thresholds) {
    for (Version v : {Version::A, Version::B, Version::C}) {
      std::vector<double> counts, kappas, agreements;
      for (const auto& r : rows) {
        if (r.version != v || r.threshold != t) continue;
        counts.push_back(static_cast<double>(r.retained));
        if (r.answer_kappa) kappas.push_back(*r.answer_kappa);
        if (r.alignment_agreement) agreements.push_back(*r.alignment_agreement);
      }
      if (counts.empty()) continue;
      AblationMean m;
      m.version = v;
      m.threshold = t;
      m.mean_retained = mean_of(counts);
      if (counts.size() > 1) {
        double ss = 0.0;
        for (double c : counts) ss += (c - m.mean_retained) * (c - m.mean_retained);
        m.sd_retained = std::sqrt(ss / static_cast<double>(counts.size() - 1));
      }
      if (!kappas.empty()) m.mean_answer_kappa = mean_of(kappas);
      if (!agreements.empty()) m.mean_alignment_agreement = mean_of(agreements);
      out.push_back(m);
    }
  }
  return out;
}

std::vector<std::string> AblationReport::violations() const {
  std::vector<std::string> v;
  std::map<std::tuple<std::size_t, double, Version>, std::size_t> cell;
  for (const auto& r : rows) cell[{r.run, r.threshold, r.version}] = r.retained;
  auto get = [&](std::size_t run, double t, Version ver) -> std::optional<std::size_t> {
    const auto it = cell.find({run, t, ver});
    if (it == cell.end()) return std::nullopt;
    return it->second;
  };
  for (std::size_t run = 0; run < repeats; ++run) {
    for (std::size_t k = 0; k < thresholds.size(); ++k) {
      const double t = thresholds[k];
      const auto a = get(run, t, Version::A), b = get(run, t, Version::B), c = get(run, t, Version::C);
      if (!a || !b || !c) {
        v.push_back(fmt::format("run {} threshold {} is missing a version", run, t));
        continue;
      }
      if (!(*c <= *b && *b <= *a)) {
        v.push_back(fmt::format("run {} threshold {}: A={} B={} C={}", run, t, *a, *b, *c));
      }
      if (k == 0) continue;
      for (Version ver : {Version::B, Version::C}) {
        const auto prev = get(run, thresholds[k - 1], ver), cur = get(run, t, ver);
        if (prev && cur && *cur > *prev) {
          v.push_back(fmt::format("run {} version {}: {} at {} after {} at {}", run, to_string(ver),
                                  *cur, t, *prev, thresholds[k - 1]));
        }
      }
    }
  }
  return v;
}

AblationReport ablate(const Gateway& gateway, const PipelineConfig& config,
                      const QuestionBank& bank, const AblationOptions& options) {
  if (options.repeats < 1) throw Error(ErrorCode::precondition, "repeats must be at least 1");
  if (options.thresholds.empty()) throw Error(ErrorCode::precondition, "no thresholds given");
  for (std::size_t k = 0; k < options.thresholds.size(); ++k) {
    const double t = options.thresholds[k];
    if (!(t > 0.0 && t < 1.0)) throw Error(ErrorCode::precondition, "thresholds must lie in (0, 1)");
    if (k && !(t > options.thresholds[k - 1])) {
      throw Error(ErrorCode::precondition, "thresholds must be strictly increasing");
    }
  }
  const TemplateSet templates = make_templates(config);

  std::vector<Question> pool;
  pool.reserve(bank.questions.size());
  for (const auto& q : bank.questions) pool.push_back(reset_to_generated(q));
  auto version_a = screening::filter_bank(std::move(pool), config.syntactic).retained;
  const std::size_t n = version_a.size();
  spdlog::info("ablation: {} questions pass the syntactic filter", n);

  // Alignment verdicts are independent of the confidence seed.
  std::vector<char> aligned(n, 0);
  if (n > 0) {
    const auto matrix =
        alignment::relevance_matrix(gateway, bank.objectives, version_a, templates, config.alignment);
    for (std::size_t j = 0; j < n; ++j) {
      aligned[j] = alignment::decide_column(matrix, j, version_a[j].origin_lo).aligned ? 1 : 0;
    }
  }

  std::vector<std::string> judge_label(n), own_label(n);
  std::vector<char> judge_yes(n, 0);
  if (options.judge) {
    parallel_for(n, options.judge->concurrency(), [&](std::size_t i) {
      const auto& q = version_a[i];
      const auto turn1 = judge::judge_answer(*options.judge, q, templates);
      const auto* lo = bank.find_objective(q.origin_lo);
      if (!lo) throw Error(ErrorCode::precondition, "unknown LO " + q.origin_lo);
      const auto turn2 = judge::judge_alignment(*options.judge, q, turn1, *lo, templates);
      judge_label[i] = turn1.label;
      judge_yes[i] = turn2.verdict == judge::Verdict::yes ? 1 : 0;
    });
  }
  for (std::size_t i = 0; i < n; ++i) own_label[i] = text::label_for(version_a[i].answer_index);
  std::vector<std::string> all_labels;
  {
    std::set<std::string> s(own_label.begin(), own_label.end());
    if (options.judge) s.insert(judge_label.begin(), judge_label.end());
    all_labels.assign(s.begin(), s.end());
  }

  auto judge_stats = [&](const std::vector<std::size_t>& members, AblationRow& row) {
    if (!options.judge || members.empty()) return;
    std::vector<std::string> a, b;
    std::size_t yes = 0;
    for (std::size_t i : members) {
      a.push_back(own_label[i]);
      b.push_back(judge_label[i]);
      yes += judge_yes[i] ? 1 : 0;
    }
    row.answer_kappa = agreement::cohen_kappa(a, b, all_labels);
    row.alignment_agreement = static_cast<double>(yes) / static_cast<double>(members.size());
  };

  AblationReport report;
  report.thresholds = options.thresholds;
  report.repeats = options.repeats;
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;

  for (std::size_t run = 0; run < options.repeats; ++run) {
    const std::uint64_t run_seed = derive_seed(config.master_seed, "ablate", run);
    std::vector<ChoiceDistribution> dist(n);
    std::vector<std::string> nota(n);
    parallel_for(n, gateway.concurrency(), [&](std::size_t i) {
      const auto pq = confidence::present(version_a[i], confidence::question_seed(run_seed, version_a[i].id),
                                          templates.get("nota.text"));
      dist[i] = confidence::confidence(gateway, pq, templates);
      nota[i] = pq.nota_label();
    });

    for (double t : options.thresholds) {
      std::vector<std::size_t> in_b, in_c;
      for (std::size_t i = 0; i < n; ++i) {
        if (!confidence::decide_from(dist[i], nota[i], t).accepted) continue;
        in_b.push_back(i);
        if (aligned[i]) in_c.push_back(i);
      }
      const std::pair<Version, const std::vector<std::size_t>*> cells[] = {
          {Version::A, &all}, {Version::B, &in_b}, {Version::C, &in_c}};
      for (const auto& [version, members] : cells) {
        AblationRow row;
        row.version = version;
        row.threshold = t;
        row.run = run;
        row.retained = members->size();
        judge_stats(*members, row);
        report.rows.push_back(row);
      }
    }
  }
  return report;
}

namespace {

std::string opt_num(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : ""; }

}  // namespace

std::string ablation_csv(const AblationReport& r) {
  std::string out = "version,threshold,run,retained,answer_kappa,alignment_agreement\n";
  for (const auto& row : r.rows) {
    out += fmt::format("{},{},{},{},{},{}\n", to_string(row.version), row.threshold, row.run,
                       row.retained, opt_num(row.answer_kappa), opt_num(row.alignment_agreement));
  }
  return out;
}

AblationReport parse_ablation_csv(std::string_view content, const std::string& source) {
  AblationReport r;
  std::size_t line_no = 0;
  bool header = false;
  std::size_t max_run = 0;
  for (const auto& raw : text::split(content, '\n')) {
    ++line_no;
    const std::string line = text::trim(raw);
    if (line.empty()) continue;
    if (!header) {
      if (line != "version,threshold,run,retained,answer_kappa,alignment_agreement") {
        throw ParseError(source, line_no, "unexpected header");
      }
      header = true;
      continue;
    }
    const auto f = text::split(line, ',');
    if (f.size() != 6) throw ParseError(source, line_no, "expected 6 fields");
    try {
      AblationRow row;
      row.version = parse_version(f[0]);
      std::size_t used = 0;
      row.threshold = std::stod(f[1], &used);
      if (used != f[1].size()) throw std::invalid_argument("threshold");
      row.run = std::stoul(f[2]);
      row.retained = std::stoul(f[3]);
      if (!f[4].empty()) row.answer_kappa = std::stod(f[4]);
      if (!f[5].empty()) row.alignment_agreement = std::stod(f[5]);
      if (std::find(r.thresholds.begin(), r.thresholds.end(), row.threshold) == r.thresholds.end()) {
        r.thresholds.push_back(row.threshold);
      }
      max_run = std::max(max_run, row.run);
      r.rows.push_back(row);
    } catch (const std::logic_error& e) {
      throw ParseError(source, line_no, std::string("bad number: ") + e.what());
    } catch (const Error& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  if (!header) throw ParseError(source, 0, "empty ablation report");
  r.repeats = r.rows.empty() ? 0 : max_run + 1;
  return r;
}

std::string ablation_means_csv(const AblationReport& r) {
  std::string out =
      "version,threshold,mean_retained,sd_retained,mean_answer_kappa,mean_alignment_agreement\n";
  for (const auto& m : r.means()) {
    out += fmt::format("{},{},{},{},{},{}\n", to_string(m.version), m.threshold, m.mean_retained,
                       m.sd_retained, opt_num(m.mean_answer_kappa), opt_num(m.mean_alignment_agreement));
  }
  return out;
}

std::string ablation_json(const AblationReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"version", to_string(row.version)},
                    {"threshold", row.threshold},
                    {"run", row.run},
                    {"retained", row.retained},
                    {"answer_kappa", opt(row.answer_kappa)},
                    {"alignment_agreement", opt(row.alignment_agreement)}});
  }
  json means = json::array();
  for (const auto& m : r.means()) {
    means.push_back({{"version", to_string(m.version)},
                     {"threshold", m.threshold},
                     {"mean_retained", m.mean_retained},
                     {"sd_retained", m.sd_retained},
                     {"mean_answer_kappa", opt(m.mean_answer_kappa)},
                     {"mean_alignment_agreement", opt(m.mean_alignment_agreement)}});
  }
  json doc = {{"thresholds", r.thresholds}, {"repeats", r.repeats}, {"rows", rows}, {"means", means}};
  return doc.dump(2) + "\n";
}

}  // namespace qgen
