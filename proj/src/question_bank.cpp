// SPDX-License-Identifier: Apache-2.0
#include "qgen/question_bank.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"
#include "qgen/error.hpp"
#include "qgen/seeding.hpp"
#include "qgen/text.hpp"

namespace qgen {

using json = nlohmann::json;

std::string_view to_string(LoForm form) {
  return form == LoForm::action_based ? "action-based" : "content-based";
}

LoForm parse_lo_form(std::string_view s) {
  const auto v = text::to_lower(text::trim(s));
  if (v == "action-based" || v == "action") return LoForm::action_based;
  if (v == "content-based" || v == "content") return LoForm::content_based;
  throw Error(ErrorCode::parse_error, fmt::format("unknown LO form '{}'", s));
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::generated: return "generated";
    case Stage::syntactic_pass: return "syntactic-pass";
    case Stage::confidence_pass: return "confidence-pass";
    case Stage::alignment_pass: return "alignment-pass";
    case Stage::rejected: return "rejected";
  }
  return "rejected";
}

Stage parse_stage(std::string_view s) {
  for (Stage st : {Stage::generated, Stage::syntactic_pass, Stage::confidence_pass,
                   Stage::alignment_pass, Stage::rejected}) {
    if (to_string(st) == s) return st;
  }
  throw Error(ErrorCode::parse_error, fmt::format("unknown stage '{}'", s));
}

int stage_rank(Stage stage) {
  return stage == Stage::rejected ? -1 : static_cast<int>(stage);
}

void advance(Question& q, Stage to) {
  if (q.stage == Stage::rejected || to == Stage::rejected || stage_rank(to) <= stage_rank(q.stage)) {
    throw Error(ErrorCode::precondition,
                fmt::format("question {}: illegal stage transition {} -> {}", q.id,
                            to_string(q.stage), to_string(to)));
  }
  q.stage = to;
}

void reject(Question& q, std::vector<std::string> reasons) {
  if (reasons.empty()) throw Error(ErrorCode::precondition, "rejection needs a reason");
  if (q.stage == Stage::rejected) {
    throw Error(ErrorCode::precondition, "question " + q.id + " is already rejected");
  }
  q.rejected_from = q.stage;
  q.stage = Stage::rejected;
  q.rejection_reasons = std::move(reasons);
}

const LearningObjective* QuestionBank::find_objective(std::string_view id) const {
  for (const auto& lo : objectives) {
    if (lo.id == id) return &lo;
  }
  return nullptr;
}

void QuestionBank::validate() const {
  std::set<std::string> los;
  for (const auto& lo : objectives) {
    if (!los.insert(lo.id).second) throw Error(ErrorCode::duplicate_id, "objective " + lo.id);
  }
  std::set<std::string> ids;
  for (const auto& q : questions) {
    if (!ids.insert(q.id).second) throw Error(ErrorCode::duplicate_id, "question " + q.id);
    if (!los.count(q.origin_lo)) {
      throw Error(ErrorCode::parse_error,
                  fmt::format("question {} references unknown objective {}", q.id, q.origin_lo));
    }
    if (q.answer_index >= q.choices.size()) {
      throw Error(ErrorCode::parse_error, "question " + q.id + " answer_index out of range");
    }
    if ((q.stage == Stage::rejected) != !q.rejection_reasons.empty()) {
      throw Error(ErrorCode::parse_error,
                  "question " + q.id + ": rejection reasons must be present iff rejected");
    }
  }
}

// ---------------------------------------------------------------------------
// Objectives file

namespace {

std::vector<std::string> split_record(std::string_view line, char delim, const std::string& source,
                                      std::size_t lineno) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  bool field_started = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == delim) {
      fields.push_back(std::move(cur));
      cur.clear();
      field_started = false;
    } else {
      cur.push_back(c);
      field_started = true;
    }
  }
  if (quoted) throw ParseError(source, lineno, "unterminated quoted field");
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace

std::vector<LearningObjective> parse_objectives(std::string_view content, char delimiter,
                                                const std::string& source) {
  std::vector<LearningObjective> out;
  std::set<std::string> seen;
  std::size_t lineno = 0;
  bool first_record = true;
  for (auto raw : text::split(content, '\n')) {
    ++lineno;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    const std::string trimmed = text::trim(raw);
    if (trimmed.empty()) continue;
    if (trimmed[0] == '#') {
      const auto body = text::normalize_space(trimmed.substr(1));
      if (text::starts_with(body, "schema_version")) {
        const auto eq = body.find_first_of("=:");
        const auto version = eq == std::string::npos ? std::string() : text::trim(body.substr(eq + 1));
        if (version != kObjectivesSchemaVersion) {
          throw Error(ErrorCode::schema_version_mismatch,
                      fmt::format("{}:{}: objectives schema_version '{}' (expected '{}')", source,
                                  lineno, version, kObjectivesSchemaVersion));
        }
      }
      continue;
    }
    auto fields = split_record(raw, delimiter, source, lineno);
    for (auto& f : fields) f = text::trim(f);
    if (first_record && text::to_lower(fields[0]) == "id") {
      first_record = false;
      continue;
    }
    first_record = false;
    if (fields.size() < 3 || fields.size() > 5) {
      throw ParseError(source, lineno,
                       fmt::format("expected 3-5 columns (id, form, text, unit, topic), got {}",
                                   fields.size()));
    }
    LearningObjective lo;
    lo.id = fields[0];
    try {
      lo.form = parse_lo_form(fields[1]);
    } catch (const Error&) {
      throw ParseError(source, lineno, "unknown LO form '" + fields[1] + "'");
    }
    lo.text = fields[2];
    if (fields.size() > 3 && !fields[3].empty()) lo.unit = fields[3];
    if (fields.size() > 4 && !fields[4].empty()) lo.topic = fields[4];
    if (lo.id.empty()) throw ParseError(source, lineno, "empty objective id");
    if (lo.text.empty()) throw ParseError(source, lineno, "empty objective text");
    if (!seen.insert(lo.id).second) {
      throw Error(ErrorCode::duplicate_id,
                  fmt::format("{}:{}: objective id '{}' appears twice", source, lineno, lo.id));
    }
    out.push_back(std::move(lo));
  }
  return out;
}

std::vector<LearningObjective> load_objectives(const std::filesystem::path& path) {
  const char delim = text::to_lower(path.extension().string()) == ".csv" ? ',' : '\t';
  return parse_objectives(read_text_file(path), delim, path.string());
}

std::string canonical_key(const Question& q) {
  std::string key = text::canonicalize(q.stem);
  key.push_back('\x1e');
  for (std::size_t i = 0; i < q.choices.size(); ++i) {
    if (i) key.push_back('\x1f');
    key += text::canonicalize(q.choices[i]);
  }
  return key;
}

// ---------------------------------------------------------------------------
// Bank JSONL

void to_json(json& j, const LearningObjective& lo) {
  j = {{"id", lo.id}, {"text", lo.text}, {"form", to_string(lo.form)}};
  if (lo.unit) j["unit"] = *lo.unit;
  if (lo.topic) j["topic"] = *lo.topic;
}

void from_json(const json& j, LearningObjective& lo) {
  lo.id = j.at("id").get<std::string>();
  lo.text = j.at("text").get<std::string>();
  lo.form = parse_lo_form(j.at("form").get<std::string>());
  lo.unit = j.contains("unit") ? std::optional(j.at("unit").get<std::string>()) : std::nullopt;
  lo.topic = j.contains("topic") ? std::optional(j.at("topic").get<std::string>()) : std::nullopt;
}

void to_json(json& j, const LabelScore& s) { j = {{"label", s.label}, {"p", s.probability}}; }
void from_json(const json& j, LabelScore& s) {
  s.label = j.at("label").get<std::string>();
  s.probability = j.at("p").get<double>();
}

void to_json(json& j, const ConfidenceRecord& c) {
  j = {{"seed", c.seed},
       {"permutation", c.permutation},
       {"distribution", c.distribution},
       {"top_label", c.top_label},
       {"top_probability", c.top_probability},
       {"threshold", c.threshold},
       {"accepted", c.accepted},
       {"reason", c.reason}};
}

void from_json(const json& j, ConfidenceRecord& c) {
  c.seed = j.at("seed").get<std::uint64_t>();
  c.permutation = j.at("permutation").get<std::vector<std::size_t>>();
  c.distribution = j.at("distribution").get<ChoiceDistribution>();
  c.top_label = j.at("top_label").get<std::string>();
  c.top_probability = j.at("top_probability").get<double>();
  c.threshold = j.at("threshold").get<double>();
  c.accepted = j.at("accepted").get<bool>();
  c.reason = j.at("reason").get<std::string>();
}

void to_json(json& j, const AlignmentRecord& a) {
  json rel = json::array();
  for (const auto& s : a.relevance) rel.push_back({{"lo", s.lo}, {"score", s.score}});
  j = {{"relevance", rel}, {"best_lo", a.best_lo}, {"tie", a.tie}, {"aligned", a.aligned}};
}

void from_json(const json& j, AlignmentRecord& a) {
  a.relevance.clear();
  for (const auto& s : j.at("relevance")) {
    a.relevance.push_back({s.at("lo").get<std::string>(), s.at("score").get<double>()});
  }
  a.best_lo = j.at("best_lo").get<std::string>();
  a.tie = j.at("tie").get<bool>();
  a.aligned = j.at("aligned").get<bool>();
}

void to_json(json& j, const Question& q) {
  j = {{"id", q.id},
       {"origin_lo", q.origin_lo},
       {"stem", q.stem},
       {"choices", q.choices},
       {"answer_index", q.answer_index},
       {"explanation", q.explanation},
       {"stage", to_string(q.stage)},
       {"rejection_reasons", q.rejection_reasons},
       {"generation_seed", q.generation_seed},
       {"flags", q.flags}};
  if (q.rejected_from) j["rejected_from"] = to_string(*q.rejected_from);
  if (q.confidence) j["confidence"] = *q.confidence;
  if (q.alignment) j["alignment"] = *q.alignment;
}

void from_json(const json& j, Question& q) {
  q.id = j.at("id").get<std::string>();
  q.origin_lo = j.at("origin_lo").get<std::string>();
  q.stem = j.at("stem").get<std::string>();
  q.choices = j.at("choices").get<std::vector<std::string>>();
  q.answer_index = j.at("answer_index").get<std::size_t>();
  q.explanation = j.at("explanation").get<std::string>();
  q.stage = parse_stage(j.at("stage").get<std::string>());
  q.rejection_reasons = j.at("rejection_reasons").get<std::vector<std::string>>();
  q.generation_seed = j.at("generation_seed").get<std::uint64_t>();
  q.flags = j.value("flags", std::vector<std::string>{});
  q.rejected_from = j.contains("rejected_from")
                        ? std::optional(parse_stage(j.at("rejected_from").get<std::string>()))
                        : std::nullopt;
  q.confidence = j.contains("confidence") ? std::optional(j.at("confidence").get<ConfidenceRecord>())
                                          : std::nullopt;
  q.alignment = j.contains("alignment") ? std::optional(j.at("alignment").get<AlignmentRecord>())
                                        : std::nullopt;
}

std::string serialize_bank(const QuestionBank& bank) {
  json header = {{"schema", kBankSchema},
                 {"schema_version", kBankSchemaVersion},
                 {"pipeline_config_digest", bank.pipeline_config_digest},
                 {"objectives", bank.objectives},
                 {"question_count", bank.questions.size()}};
  std::string out = header.dump();
  out.push_back('\n');
  for (const auto& q : bank.questions) {
    out += json(q).dump();
    out.push_back('\n');
  }
  return out;
}

QuestionBank parse_bank(std::string_view content, const std::string& source) {
  QuestionBank bank;
  std::size_t lineno = 0;
  std::size_t expected = 0;
  bool have_header = false;
  for (const auto& line : text::split(content, '\n')) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(source, lineno, e.what());
    }
    try {
      if (!have_header) {
        if (j.value("schema", std::string()) != kBankSchema) {
          throw ParseError(source, lineno, "not a question bank (missing schema header)");
        }
        const auto version = j.value("schema_version", std::string());
        if (version != kBankSchemaVersion) {
          throw Error(ErrorCode::schema_version_mismatch,
                      fmt::format("{}: bank schema_version '{}' (expected '{}')", source, version,
                                  kBankSchemaVersion));
        }
        bank.pipeline_config_digest = j.value("pipeline_config_digest", std::string());
        bank.objectives = j.at("objectives").get<std::vector<LearningObjective>>();
        expected = j.at("question_count").get<std::size_t>();
        have_header = true;
        continue;
      }
      bank.questions.push_back(j.get<Question>());
    } catch (const json::exception& e) {
      throw ParseError(source, lineno, e.what());
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::schema_version_mismatch) throw;
      throw ParseError(source, lineno, e.what());
    }
  }
  if (!have_header) throw ParseError(source, 1, "missing bank header line");
  if (bank.questions.size() != expected) {
    throw ParseError(source, lineno,
                     fmt::format("header announces {} questions, file has {}", expected,
                                 bank.questions.size()));
  }
  bank.validate();
  return bank;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_error, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::io_error, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_bank(const QuestionBank& bank, const std::filesystem::path& path) {
  bank.validate();
  write_text_file(path, serialize_bank(bank));
}

QuestionBank read_bank(const std::filesystem::path& path) {
  return parse_bank(read_text_file(path), path.string());
}

std::string bank_digest(const QuestionBank& bank) { return content_digest(serialize_bank(bank)); }

}  // namespace qgen
