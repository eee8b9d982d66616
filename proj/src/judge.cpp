// SPDX-License-Identifier: Apache-2.0
#include "qgen/judge.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"
#include "qgen/error.hpp"
#include "qgen/parallel.hpp"
#include "qgen/seeding.hpp"
#include "qgen/text.hpp"

namespace qgen::judge {

using json = nlohmann::json;

inline constexpr std::string_view kEvalSetSchema = "qgen-eval-set";
inline constexpr std::string_view kEvalSetVersion = "1";

std::string_view to_string(Condition c) {
  return c == Condition::control ? "control" : "treatment";
}

Condition parse_condition(std::string_view s) {
  if (s == "control") return Condition::control;
  if (s == "treatment") return Condition::treatment;
  throw Error(ErrorCode::parse_error, fmt::format("unknown condition '{}'", s));
}

std::string_view to_string(Verdict v) { return v == Verdict::yes ? "yes" : "no"; }

Verdict parse_verdict(std::string_view s) {
  const std::string lower = text::to_lower(text::trim(s));
  if (lower == "yes") return Verdict::yes;
  if (lower == "no") return Verdict::no;
  throw Error(ErrorCode::parse_error, fmt::format("unknown verdict '{}'", s));
}

// ---------------------------------------------------------------------------
// Evaluation set

EvalSet build_eval_set(const QuestionBank& bank, std::size_t n_los, std::size_t per_lo,
                       std::uint64_t seed) {
  if (n_los < 2) throw Error(ErrorCode::precondition, "n_los must be at least 2");
  if (per_lo < 2 || per_lo % 2 != 0) {
    throw Error(ErrorCode::precondition, "per_lo must be a positive even number");
  }

  std::map<std::string, std::vector<std::size_t>> pool;
  for (std::size_t i = 0; i < bank.questions.size(); ++i) {
    const auto& q = bank.questions[i];
    if (q.stage == Stage::alignment_pass) pool[q.origin_lo].push_back(i);
  }

  std::vector<std::size_t> eligible;
  std::vector<std::string> deficient;
  for (std::size_t i = 0; i < bank.objectives.size(); ++i) {
    const auto& id = bank.objectives[i].id;
    const std::size_t have = pool.count(id) ? pool[id].size() : 0;
    if (have >= per_lo) {
      eligible.push_back(i);
    } else {
      deficient.push_back(fmt::format("{} ({} of {})", id, have, per_lo));
    }
  }
  if (eligible.size() < n_los) {
    throw Error(ErrorCode::insufficient_questions,
                fmt::format("{} LOs have at least {} alignment-pass questions, {} needed; short: {}",
                            eligible.size(), per_lo, n_los, fmt::join(deficient, ", ")));
  }

  EvalSet set;
  set.seed = seed;
  const auto lo_perm = seeded_permutation(eligible.size(), derive_seed(seed, "eval-los"));
  std::vector<std::size_t> chosen;
  for (std::size_t k = 0; k < n_los; ++k) chosen.push_back(eligible[lo_perm[k]]);
  std::sort(chosen.begin(), chosen.end());
  for (std::size_t idx : chosen) set.lo_ids.push_back(bank.objectives[idx].id);

  Rng shown_rng(derive_seed(seed, "eval-shown"));
  for (std::size_t l = 0; l < set.lo_ids.size(); ++l) {
    const auto& lo = set.lo_ids[l];
    const auto& candidates = pool[lo];
    const auto perm = seeded_permutation(candidates.size(), derive_seed(seed, "eval-questions:" + lo));
    for (std::size_t k = 0; k < per_lo; ++k) {
      const auto& q = bank.questions[candidates[perm[k]]];
      EvalItem item;
      item.question_id = q.id;
      item.origin_lo = lo;
      if (k < per_lo / 2) {
        item.condition = Condition::control;
        item.shown_lo = lo;
      } else {
        item.condition = Condition::treatment;
        std::size_t other = uniform_index(shown_rng, set.lo_ids.size() - 1);
        if (other >= l) ++other;
        item.shown_lo = set.lo_ids[other];
      }
      set.items.push_back(std::move(item));
    }
  }

  const auto order = seeded_permutation(set.items.size(), derive_seed(seed, "eval-order"));
  for (std::size_t p = 0; p < order.size(); ++p) set.items[order[p]].presentation_order = p;
  return set;
}

std::vector<std::size_t> judge_order(const EvalSet& set, const std::string& judge_id) {
  return seeded_permutation(set.items.size(), derive_seed(set.seed, "judge-order:" + judge_id));
}

std::vector<std::string> check_eval_set(const EvalSet& set, std::size_t n_los,
                                        std::size_t per_lo) {
  std::vector<std::string> v;
  const std::size_t half = per_lo / 2;
  if (set.items.size() != n_los * per_lo) {
    v.push_back(fmt::format("{} items, expected {}", set.items.size(), n_los * per_lo));
  }
  if (set.lo_ids.size() != n_los) {
    v.push_back(fmt::format("{} LOs, expected {}", set.lo_ids.size(), n_los));
  }
  std::map<std::string, std::pair<std::size_t, std::size_t>> per;
  std::size_t control = 0, treatment = 0;
  std::set<std::string> ids;
  std::set<std::size_t> orders;
  const std::set<std::string> selected(set.lo_ids.begin(), set.lo_ids.end());
  for (const auto& it : set.items) {
    if (!ids.insert(it.question_id).second) v.push_back("repeated question " + it.question_id);
    orders.insert(it.presentation_order);
    if (!selected.count(it.shown_lo)) v.push_back("shown LO not selected: " + it.shown_lo);
    if (it.condition == Condition::control) {
      ++control;
      ++per[it.origin_lo].first;
      if (it.shown_lo != it.origin_lo) v.push_back("control item shows a foreign LO: " + it.question_id);
    } else {
      ++treatment;
      ++per[it.origin_lo].second;
      if (it.shown_lo == it.origin_lo) v.push_back("treatment item shows its origin LO: " + it.question_id);
    }
  }
  if (control != n_los * half || treatment != n_los * half) {
    v.push_back(fmt::format("condition split {}/{}", control, treatment));
  }
  for (const auto& lo : set.lo_ids) {
    const auto [c, t] = per[lo];
    if (c != half || t != half) v.push_back(fmt::format("LO {} has {}/{} items", lo, c, t));
  }
  if (orders.size() != set.items.size() ||
      (!orders.empty() && *orders.rbegin() != set.items.size() - 1)) {
    v.push_back("presentation order is not a permutation");
  }
  return v;
}

std::string serialize_eval_set(const EvalSet& set) {
  json items = json::array();
  for (const auto& it : set.items) {
    items.push_back({{"question_id", it.question_id},
                     {"origin_lo", it.origin_lo},
                     {"shown_lo", it.shown_lo},
                     {"condition", to_string(it.condition)},
                     {"presentation_order", it.presentation_order}});
  }
  json doc = {{"schema", kEvalSetSchema},
              {"schema_version", kEvalSetVersion},
              {"seed", set.seed},
              {"lo_ids", set.lo_ids},
              {"items", items}};
  return doc.dump(2) + "\n";
}

EvalSet parse_eval_set(std::string_view content, const std::string& source) {
  EvalSet set;
  try {
    const json doc = json::parse(content);
    if (doc.at("schema").get<std::string>() != kEvalSetSchema) {
      throw ParseError(source, 0, "not an evaluation set");
    }
    const auto version = doc.at("schema_version").get<std::string>();
    if (version != kEvalSetVersion) {
      throw Error(ErrorCode::schema_version_mismatch,
                  fmt::format("{}: version {} (expected {})", source, version, kEvalSetVersion));
    }
    set.seed = doc.at("seed").get<std::uint64_t>();
    set.lo_ids = doc.at("lo_ids").get<std::vector<std::string>>();
    for (const auto& j : doc.at("items")) {
      EvalItem it;
      it.question_id = j.at("question_id").get<std::string>();
      it.origin_lo = j.at("origin_lo").get<std::string>();
      it.shown_lo = j.at("shown_lo").get<std::string>();
      it.condition = parse_condition(j.at("condition").get<std::string>());
      it.presentation_order = j.at("presentation_order").get<std::size_t>();
      set.items.push_back(std::move(it));
    }
  } catch (const json::exception& e) {
    throw ParseError(source, 0, e.what());
  }
  return set;
}

void write_eval_set(const EvalSet& set, const std::filesystem::path& path) {
  write_text_file(path, serialize_eval_set(set));
}

EvalSet read_eval_set(const std::filesystem::path& path) {
  return parse_eval_set(read_text_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Conversations

std::vector<std::string> judged_labels(const Question& q) {
  std::vector<std::string> labels;
  for (std::size_t i = 0; i <= q.choices.size(); ++i) labels.push_back(text::label_for(i));
  return labels;
}

std::string answer_message(const Question& q, const TemplateSet& templates) {
  std::string choices;
  const auto labels = judged_labels(q);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) choices += '\n';
    const std::string& body = i < q.choices.size() ? q.choices[i] : templates.get("nota.text");
    choices += render(templates.get("choice.anchor"), {{"label", labels[i]}}) + " " + body;
  }
  return render(templates.get("judge.answer.user"), {{"stem", q.stem}, {"choices", choices}});
}

std::string alignment_message(const LearningObjective& shown, const TemplateSet& templates) {
  return render(templates.get("judge.alignment.user"), {{"learning objective", shown.text}});
}

std::string render_conversation(const std::vector<Turn>& turns) {
  std::string out;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (i) out += "\n\n";
    out += turns[i].role_prefix + turns[i].text;
  }
  return out;
}

namespace {

std::vector<Turn> answer_turns(const Question& q, const TemplateSet& templates,
                               const std::string& answer_text) {
  return {{templates.get("role.user"), answer_message(q, templates)},
          {templates.get("role.assistant"), templates.get("judge.answer.prefix") + answer_text}};
}

/// Closing markup after the label, taken from the open prefix ("**" -> "**").
std::string closing_of(const std::string& prefix) {
  std::size_t n = 0;
  while (n < prefix.size() && !std::isalnum(static_cast<unsigned char>(prefix[prefix.size() - 1 - n])) &&
         prefix[prefix.size() - 1 - n] != ' ') {
    ++n;
  }
  std::string tail = prefix.substr(prefix.size() - n);
  std::reverse(tail.begin(), tail.end());
  return tail;
}

}  // namespace

AnswerFragment judge_answer(const Gateway& gateway, const Question& q,
                            const TemplateSet& templates) {
  AnswerFragment f;
  f.prompt = render_conversation(answer_turns(q, templates, ""));
  f.distribution = gateway.label_distribution(f.prompt, judged_labels(q));
  const std::size_t best = argmax(f.distribution, &f.tie);
  f.label = f.distribution[best].label;
  if (f.tie) spdlog::debug("answer tie on {}; taking label {}", q.id, f.label);
  return f;
}

AlignmentFragment judge_alignment(const Gateway& gateway, const Question& q,
                                  const AnswerFragment& turn1, const LearningObjective& shown,
                                  const TemplateSet& templates) {
  const std::string answered =
      turn1.label + closing_of(templates.get("judge.answer.prefix"));
  auto turns = answer_turns(q, templates, answered);
  turns.push_back({templates.get("role.user"), alignment_message(shown, templates)});
  turns.push_back({templates.get("role.assistant"), templates.get("judge.alignment.prefix")});

  AlignmentFragment f;
  f.prompt = render_conversation(turns);
  const auto dist = gateway.label_distribution(f.prompt, {"Yes", "No"});
  f.p_yes = dist[0].probability;
  const double p_no = dist[1].probability;
  f.tie = f.p_yes == p_no;
  f.verdict = f.p_yes > p_no ? Verdict::yes : Verdict::no;
  if (f.tie) spdlog::debug("yes/no tie on {}; verdict no", q.id);
  return f;
}

namespace {

const Question& find_question(const QuestionBank& bank, const std::string& id) {
  for (const auto& q : bank.questions) {
    if (q.id == id) return q;
  }
  throw Error(ErrorCode::precondition, "question " + id + " is not in the bank");
}

const LearningObjective& find_lo(const QuestionBank& bank, const std::string& id) {
  const auto* lo = bank.find_objective(id);
  if (!lo) throw Error(ErrorCode::precondition, "LO " + id + " is not in the bank");
  return *lo;
}

}  // namespace

JudgmentRecord judge_item(const Gateway& gateway, const std::string& judge_id,
                          const EvalItem& item, const QuestionBank& bank,
                          const TemplateSet& templates) {
  const Question& q = find_question(bank, item.question_id);
  const auto turn1 = judge_answer(gateway, q, templates);
  const auto turn2 = judge_alignment(gateway, q, turn1, find_lo(bank, item.shown_lo), templates);

  JudgmentRecord r;
  r.judge_id = judge_id;
  r.question_id = q.id;
  r.answer_label = turn1.label;
  r.answer_distribution = turn1.distribution;
  r.alignment_verdict = turn2.verdict;
  r.p_yes = turn2.p_yes;
  r.shown_lo = item.shown_lo;
  r.condition = item.condition;
  if (turn1.tie) r.flags.emplace_back("answer-tie");
  if (turn2.tie) r.flags.emplace_back("verdict-tie");
  return r;
}

std::vector<JudgmentRecord> run_judge(const Gateway& gateway, const std::string& judge_id,
                                      const EvalSet& set, const QuestionBank& bank,
                                      const TemplateSet& templates) {
  const auto order = judge_order(set, judge_id);
  std::vector<JudgmentRecord> out(order.size());
  parallel_for(order.size(), gateway.concurrency(), [&](std::size_t p) {
    out[p] = judge_item(gateway, judge_id, set.items[order[p]], bank, templates);
  });
  return out;
}

std::vector<JudgmentRecord> pipeline_judgments(const std::string& judge_id, const EvalSet& set,
                                               const QuestionBank& bank) {
  std::vector<JudgmentRecord> out;
  for (const auto& item : set.items) {
    const Question& q = find_question(bank, item.question_id);
    JudgmentRecord r;
    r.judge_id = judge_id;
    r.question_id = q.id;
    r.answer_label = text::label_for(q.answer_index);
    const std::string& best =
        q.alignment && !q.alignment->best_lo.empty() ? q.alignment->best_lo : q.origin_lo;
    r.alignment_verdict = item.shown_lo == best ? Verdict::yes : Verdict::no;
    r.shown_lo = item.shown_lo;
    r.condition = item.condition;
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Record files

std::string serialize_records(const std::vector<JudgmentRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    json j = {{"judge_id", r.judge_id},
              {"question_id", r.question_id},
              {"answer_label", r.answer_label},
              {"alignment_verdict", to_string(r.alignment_verdict)}};
    if (r.answer_distribution) {
      json d = json::array();
      for (const auto& s : *r.answer_distribution) d.push_back({{"label", s.label}, {"p", s.probability}});
      j["answer_distribution"] = d;
    }
    if (r.p_yes) j["p_yes"] = *r.p_yes;
    if (!r.shown_lo.empty()) j["shown_lo"] = r.shown_lo;
    if (r.condition) j["condition"] = to_string(*r.condition);
    if (!r.flags.empty()) j["flags"] = r.flags;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<JudgmentRecord> parse_records(std::string_view content, const std::string& source) {
  std::vector<JudgmentRecord> out;
  std::size_t line_no = 0;
  for (const auto& line : text::split(content, '\n')) {
    ++line_no;
    const std::string trimmed = text::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    try {
      const json j = json::parse(trimmed);
      JudgmentRecord r;
      r.judge_id = j.at("judge_id").get<std::string>();
      r.question_id = j.at("question_id").get<std::string>();
      r.answer_label = text::to_lower(text::trim(j.at("answer_label").get<std::string>()));
      r.alignment_verdict = parse_verdict(j.at("alignment_verdict").get<std::string>());
      if (j.contains("answer_distribution") && !j["answer_distribution"].is_null()) {
        ChoiceDistribution d;
        for (const auto& s : j["answer_distribution"]) {
          d.push_back({s.at("label").get<std::string>(), s.at("p").get<double>()});
        }
        r.answer_distribution = std::move(d);
      }
      if (j.contains("p_yes") && !j["p_yes"].is_null()) {
        const double p = j["p_yes"].get<double>();
        if (!(p >= 0.0 && p <= 1.0)) throw ParseError(source, line_no, "p_yes outside [0, 1]");
        r.p_yes = p;
      }
      r.shown_lo = j.value("shown_lo", "");
      if (j.contains("condition") && !j["condition"].is_null()) {
        r.condition = parse_condition(j["condition"].get<std::string>());
      }
      if (j.contains("flags")) r.flags = j["flags"].get<std::vector<std::string>>();
      if (r.judge_id.empty() || r.question_id.empty() || r.answer_label.empty()) {
        throw ParseError(source, line_no, "judge_id, question_id and answer_label are required");
      }
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError(source, line_no, e.what());
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  return out;
}

void write_records(const std::vector<JudgmentRecord>& records, const std::filesystem::path& path) {
  write_text_file(path, serialize_records(records));
}

std::vector<JudgmentRecord> read_records(const std::filesystem::path& path) {
  return parse_records(read_text_file(path), path.string());
}

}  // namespace qgen::judge
