// SPDX-License-Identifier: Apache-2.0
#include "qgen/agreement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "json.hpp"
#include "qgen/error.hpp"

namespace qgen::agreement {

using json = nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t label_index(const std::vector<std::string>& labels, const std::string& label) {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw Error(ErrorCode::unknown_label, "label '" + label + "' not in label set");
  return static_cast<std::size_t>(it - labels.begin());
}

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) {
    throw Error(ErrorCode::length_mismatch, fmt::format("rating vectors of length {} and {}", a, b));
  }
}

}  // namespace

Kappa cohen(const std::vector<std::string>& a, const std::vector<std::string>& b,
            const std::vector<std::string>& labels) {
  check_lengths(a.size(), b.size());
  if (a.empty()) throw Error(ErrorCode::precondition, "kappa needs at least one rating");
  const std::size_t k = labels.size();
  std::vector<double> fa(k, 0.0), fb(k, 0.0);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto ia = label_index(labels, a[i]);
    const auto ib = label_index(labels, b[i]);
    fa[ia] += 1.0;
    fb[ib] += 1.0;
    if (ia == ib) ++agree;
  }
  const double n = static_cast<double>(a.size());
  Kappa r;
  r.observed = static_cast<double>(agree) / n;
  for (std::size_t j = 0; j < k; ++j) r.expected += (fa[j] / n) * (fb[j] / n);
  if (r.expected == 1.0) {
    r.degenerate = true;
    r.value = r.observed == 1.0 ? 1.0 : 0.0;
  } else if (agree == a.size()) {
    r.value = 1.0;
  } else {
    r.value = (r.observed - r.expected) / (1.0 - r.expected);
  }
  return r;
}

double cohen_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b,
                   const std::vector<std::string>& labels) {
  return cohen(a, b, labels).value;
}

Kappa fleiss(const std::vector<std::vector<std::size_t>>& counts, std::size_t n) {
  if (n < 2) throw Error(ErrorCode::precondition, "Fleiss' kappa needs at least two raters");
  if (counts.empty()) throw Error(ErrorCode::precondition, "Fleiss' kappa needs at least one item");
  const std::size_t k = counts.front().size();
  std::vector<double> column(k, 0.0);
  double p_bar = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const auto& row = counts[i];
    if (row.size() != k) {
      throw Error(ErrorCode::ragged_counts, fmt::format("item {} has {} categories, expected {}", i, row.size(), k));
    }
    std::size_t total = 0;
    double squares = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      total += row[j];
      column[j] += static_cast<double>(row[j]);
      squares += static_cast<double>(row[j]) * static_cast<double>(row[j]);
    }
    if (total != n) {
      throw Error(ErrorCode::ragged_counts, fmt::format("item {} has {} ratings, expected {}", i, total, n));
    }
    const double dn = static_cast<double>(n);
    p_bar += (squares - dn) / (dn * (dn - 1.0));
  }
  const double items = static_cast<double>(counts.size());
  p_bar /= items;
  Kappa r;
  r.observed = p_bar;
  for (double c : column) {
    const double p = c / (items * static_cast<double>(n));
    r.expected += p * p;
  }
  if (r.expected == 1.0) {
    r.degenerate = true;
    r.value = p_bar == 1.0 ? 1.0 : 0.0;
  } else {
    r.value = (p_bar - r.expected) / (1.0 - r.expected);
  }
  return r;
}

double fleiss_kappa(const std::vector<std::vector<std::size_t>>& counts, std::size_t n) {
  return fleiss(counts, n).value;
}

std::vector<std::vector<std::size_t>> confusion(const std::vector<std::string>& a,
                                                const std::vector<std::string>& b,
                                                const std::vector<std::string>& labels) {
  check_lengths(a.size(), b.size());
  std::vector<std::vector<std::size_t>> m(labels.size(), std::vector<std::size_t>(labels.size(), 0));
  for (std::size_t i = 0; i < a.size(); ++i) ++m[label_index(labels, a[i])][label_index(labels, b[i])];
  return m;
}

std::string_view to_string(Field f) { return f == Field::answer ? "answer" : "alignment"; }

Field parse_field(std::string_view s) {
  if (s == "answer") return Field::answer;
  if (s == "alignment") return Field::alignment;
  throw Error(ErrorCode::precondition, fmt::format("unknown field '{}'", s));
}

// ---------------------------------------------------------------------------

RatingTable RatingTable::from_records(const std::vector<judge::JudgmentRecord>& records,
                                      Field field) {
  RatingTable t;
  std::map<std::string, std::size_t> judge_pos, item_pos;
  for (const auto& r : records) {
    if (judge_pos.emplace(r.judge_id, t.judges.size()).second) t.judges.push_back(r.judge_id);
    if (item_pos.emplace(r.question_id, t.items.size()).second) t.items.push_back(r.question_id);
  }
  std::vector<std::vector<std::optional<std::string>>> grid(
      t.judges.size(), std::vector<std::optional<std::string>>(t.items.size()));
  std::set<std::string> seen;
  for (const auto& r : records) {
    auto& cell = grid[judge_pos[r.judge_id]][item_pos[r.question_id]];
    if (cell) {
      throw Error(ErrorCode::duplicate_id,
                  fmt::format("judge {} rated {} more than once", r.judge_id, r.question_id));
    }
    cell = field == Field::answer ? r.answer_label : std::string(judge::to_string(r.alignment_verdict));
    seen.insert(*cell);
  }
  if (field == Field::answer) {
    t.labels.assign(seen.begin(), seen.end());
  } else {
    t.labels = {"yes", "no"};
  }
  t.ratings.resize(t.judges.size());
  for (std::size_t j = 0; j < t.judges.size(); ++j) {
    for (std::size_t i = 0; i < t.items.size(); ++i) {
      if (!grid[j][i]) {
        throw Error(ErrorCode::incomplete_table,
                    fmt::format("judge {} has no rating for {}", t.judges[j], t.items[i]));
      }
      t.ratings[j].push_back(*grid[j][i]);
    }
  }
  return t;
}

void RatingTable::validate() const {
  if (ratings.size() != judges.size()) {
    throw Error(ErrorCode::incomplete_table, "one rating row per judge is required");
  }
  for (std::size_t j = 0; j < judges.size(); ++j) {
    if (ratings[j].size() != items.size()) {
      throw Error(ErrorCode::incomplete_table,
                  fmt::format("judge {} rated {} of {} items", judges[j], ratings[j].size(), items.size()));
    }
    for (const auto& r : ratings[j]) label_index(labels, r);
  }
}

std::size_t RatingTable::judge_index(std::string_view judge) const {
  const auto it = std::find(judges.begin(), judges.end(), judge);
  if (it == judges.end()) throw Error(ErrorCode::precondition, fmt::format("unknown judge '{}'", judge));
  return static_cast<std::size_t>(it - judges.begin());
}

std::vector<std::vector<std::size_t>> RatingTable::counts(
    const std::vector<std::string>& subset) const {
  std::vector<std::vector<std::size_t>> c(items.size(), std::vector<std::size_t>(labels.size(), 0));
  for (const auto& judge : subset) {
    const auto& row = ratings[judge_index(judge)];
    for (std::size_t i = 0; i < items.size(); ++i) ++c[i][label_index(labels, row[i])];
  }
  return c;
}

std::vector<std::string> majority(const RatingTable& table, const std::vector<std::string>& subset) {
  const auto& who = subset.empty() ? table.judges : subset;
  const auto c = table.counts(who);
  std::vector<std::string> out;
  out.reserve(c.size());
  for (const auto& row : c) {
    std::size_t best = 0;
    bool tied = false;
    for (std::size_t j = 1; j < row.size(); ++j) {
      if (row[j] > row[best]) {
        best = j;
        tied = false;
      } else if (row[j] == row[best]) {
        tied = true;
      }
    }
    out.push_back(tied || row.empty() ? std::string(kTie) : table.labels[best]);
  }
  return out;
}

double fleiss_subset(const RatingTable& table, const std::vector<std::string>& subset) {
  return fleiss_kappa(table.counts(subset), subset.size());
}

GroupStat group_stat(const std::vector<double>& values) {
  GroupStat g;
  g.pairs = values.size();
  if (values.empty()) {
    g.mean = kNaN;
    g.standard_error = kNaN;
    return g;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  g.mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) {
    g.standard_error = kNaN;
    return g;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - g.mean) * (v - g.mean);
  const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  g.standard_error = sd / std::sqrt(static_cast<double>(values.size()));
  return g;
}

AgreementReport report(const RatingTable& table, const std::vector<std::string>& machine_judges,
                       Field field) {
  table.validate();
  AgreementReport r;
  r.field = field;
  r.judges = table.judges;
  r.labels = table.labels;
  r.items = table.items;
  const std::set<std::string> machine_set(machine_judges.begin(), machine_judges.end());
  for (const auto& m : machine_judges) table.judge_index(m);
  for (const auto& j : table.judges) (machine_set.count(j) ? r.machines : r.humans).push_back(j);

  const std::size_t nj = table.judges.size();
  r.pairwise.assign(nj, std::vector<double>(nj, kNaN));
  std::vector<double> all, hh, mm;
  std::map<std::string, std::vector<double>> mh;
  for (std::size_t a = 0; a < nj; ++a) {
    for (std::size_t b = a + 1; b < nj; ++b) {
      const Kappa k = cohen(table.ratings[a], table.ratings[b], table.labels);
      r.pairwise[a][b] = r.pairwise[b][a] = k.value;
      if (k.degenerate) r.degenerate_pairs.emplace_back(table.judges[a], table.judges[b]);
      all.push_back(k.value);
      const bool ma = machine_set.count(table.judges[a]) > 0;
      const bool mb = machine_set.count(table.judges[b]) > 0;
      if (!ma && !mb) {
        hh.push_back(k.value);
      } else if (ma && mb) {
        mm.push_back(k.value);
      } else {
        mh[ma ? table.judges[a] : table.judges[b]].push_back(k.value);
      }
    }
  }
  r.all_pairs = group_stat(all);
  r.human_human = group_stat(hh);
  r.machine_machine = group_stat(mm);
  for (const auto& m : r.machines) r.machine_human[m] = group_stat(mh[m]);

  if (nj >= 2) r.fleiss_all = fleiss_subset(table, table.judges);
  if (r.humans.size() >= 2) {
    r.fleiss_humans = fleiss_subset(table, r.humans);
    for (const auto& m : r.machines) {
      auto subset = r.humans;
      subset.push_back(m);
      r.fleiss_humans_plus[m] = fleiss_subset(table, subset);
    }
  }

  r.majority_labels = majority(table, r.humans.empty() ? table.judges : r.humans);
  r.majority_ties = static_cast<std::size_t>(
      std::count(r.majority_labels.begin(), r.majority_labels.end(), std::string(kTie)));

  for (const auto& m : r.machines) {
    const auto& row = table.ratings[table.judge_index(m)];
    MachineStats s;
    s.judge = m;
    std::vector<std::string> maj, mine;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (r.majority_labels[i] == kTie) continue;
      maj.push_back(r.majority_labels[i]);
      mine.push_back(row[i]);
      if (row[i] == r.majority_labels[i]) ++s.correct;
    }
    s.scored = maj.size();
    if (s.scored > 0) {
      s.accuracy = static_cast<double>(s.correct) / static_cast<double>(s.scored);
      s.kappa_vs_majority = cohen(maj, mine, table.labels);
    } else {
      s.accuracy = kNaN;
      s.kappa_vs_majority.value = kNaN;
    }
    s.confusion_vs_majority = confusion(maj, mine, table.labels);
    r.machine_stats.push_back(std::move(s));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Output

namespace {

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json group_json(const GroupStat& g) {
  return {{"mean", num(g.mean)}, {"standard_error", num(g.standard_error)}, {"pairs", g.pairs}};
}

std::string csv_num(double v) { return std::isfinite(v) ? fmt::format("{}", v) : ""; }

}  // namespace

std::string report_json(const AgreementReport& r) {
  json pairwise = json::array();
  for (const auto& row : r.pairwise) {
    json jr = json::array();
    for (double v : row) jr.push_back(num(v));
    pairwise.push_back(jr);
  }
  json degenerate = json::array();
  for (const auto& [a, b] : r.degenerate_pairs) degenerate.push_back({a, b});
  json mh = json::object();
  for (const auto& [m, g] : r.machine_human) mh[m] = group_json(g);
  json plus = json::object();
  for (const auto& [m, v] : r.fleiss_humans_plus) plus[m] = num(v);
  json machines = json::array();
  for (const auto& s : r.machine_stats) {
    machines.push_back({{"judge", s.judge},
                        {"scored", s.scored},
                        {"correct", s.correct},
                        {"accuracy", num(s.accuracy)},
                        {"kappa_vs_majority", num(s.kappa_vs_majority.value)},
                        {"kappa_degenerate", s.kappa_vs_majority.degenerate},
                        {"confusion_vs_majority", s.confusion_vs_majority}});
  }
  json majority = json::object();
  for (std::size_t i = 0; i < r.items.size(); ++i) majority[r.items[i]] = r.majority_labels[i];

  json doc = {{"field", to_string(r.field)},
              {"judges", r.judges},
              {"humans", r.humans},
              {"machines", r.machines},
              {"labels", r.labels},
              {"pairwise_kappa", pairwise},
              {"degenerate_pairs", degenerate},
              {"mean_pairwise", num(r.all_pairs.mean)},
              {"standard_error", num(r.all_pairs.standard_error)},
              {"human_human", group_json(r.human_human)},
              {"machine_human", mh},
              {"machine_machine", group_json(r.machine_machine)},
              {"fleiss", num(r.fleiss_all)},
              {"fleiss_humans", r.fleiss_humans ? num(*r.fleiss_humans) : json(nullptr)},
              {"fleiss_humans_plus", plus},
              {"majority_labels", majority},
              {"majority_ties", r.majority_ties},
              {"machine_stats", machines}};
  return doc.dump(2) + "\n";
}

std::string report_csv(const AgreementReport& r) {
  std::string out = "section,key,judge_a,judge_b,value\n";
  for (std::size_t a = 0; a < r.judges.size(); ++a) {
    for (std::size_t b = a + 1; b < r.judges.size(); ++b) {
      out += fmt::format("pairwise,kappa,{},{},{}\n", r.judges[a], r.judges[b], csv_num(r.pairwise[a][b]));
    }
  }
  auto group = [&](const std::string& key, const std::string& who, const GroupStat& g) {
    out += fmt::format("group,{}_mean,{},,{}\n", key, who, csv_num(g.mean));
    out += fmt::format("group,{}_se,{},,{}\n", key, who, csv_num(g.standard_error));
    out += fmt::format("group,{}_pairs,{},,{}\n", key, who, g.pairs);
  };
  group("all", "", r.all_pairs);
  group("human_human", "", r.human_human);
  for (const auto& [m, g] : r.machine_human) group("machine_human", m, g);
  group("machine_machine", "", r.machine_machine);
  out += fmt::format("fleiss,all,,,{}\n", csv_num(r.fleiss_all));
  if (r.fleiss_humans) out += fmt::format("fleiss,humans,,,{}\n", csv_num(*r.fleiss_humans));
  for (const auto& [m, v] : r.fleiss_humans_plus) out += fmt::format("fleiss,humans_plus,{},,{}\n", m, csv_num(v));
  for (const auto& s : r.machine_stats) {
    out += fmt::format("machine,accuracy,{},,{}\n", s.judge, csv_num(s.accuracy));
    out += fmt::format("machine,correct,{},,{}\n", s.judge, s.correct);
    out += fmt::format("machine,scored,{},,{}\n", s.judge, s.scored);
    out += fmt::format("machine,kappa_vs_majority,{},,{}\n", s.judge, csv_num(s.kappa_vs_majority.value));
  }
  out += fmt::format("majority,ties,,,{}\n", r.majority_ties);
  return out;
}

std::string heatmap_csv(const AgreementReport& r) {
  std::string out = "judge";
  for (const auto& j : r.judges) out += "," + j;
  out += '\n';
  for (std::size_t a = 0; a < r.judges.size(); ++a) {
    out += r.judges[a];
    for (std::size_t b = 0; b < r.judges.size(); ++b) out += "," + csv_num(r.pairwise[a][b]);
    out += '\n';
  }
  return out;
}

}  // namespace qgen::agreement
