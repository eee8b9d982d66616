// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file agreement.hpp
 * @brief Inter-rater agreement: Cohen's and Fleiss' kappa, majority vote,
 * confusion matrices and the judge report.
 *
 * Standard error of a mean pairwise kappa is the sample standard deviation
 * of the pairwise values divided by sqrt(number of pairs); it is NaN when
 * fewer than two pairs exist.
 */

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qgen/judge.hpp"

namespace qgen::agreement {

/// Majority label for an item without a strict plurality.
inline constexpr std::string_view kTie = "<tie>";

struct Kappa {
  double value = 0.0;
  double observed = 0.0;  // p_o
  double expected = 0.0;  // p_e
  /// p_e == 1: value is 1 when p_o == 1 and 0 otherwise.
  bool degenerate = false;
};

Kappa cohen(const std::vector<std::string>& a, const std::vector<std::string>& b,
            const std::vector<std::string>& labels);
double cohen_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b,
                   const std::vector<std::string>& labels);

/// counts[i][j] = raters who put item i in category j; each row sums to n.
Kappa fleiss(const std::vector<std::vector<std::size_t>>& counts, std::size_t raters_per_item);
double fleiss_kappa(const std::vector<std::vector<std::size_t>>& counts,
                    std::size_t raters_per_item);

/// confusion[i][j] = items with a = labels[i] and b = labels[j].
std::vector<std::vector<std::size_t>> confusion(const std::vector<std::string>& a,
                                                const std::vector<std::string>& b,
                                                const std::vector<std::string>& labels);

enum class Field { answer, alignment };
std::string_view to_string(Field f);
Field parse_field(std::string_view s);

struct RatingTable {
  std::vector<std::string> items;
  std::vector<std::string> judges;
  std::vector<std::string> labels;
  /// ratings[j][i] = label judge j gave item i.
  std::vector<std::vector<std::string>> ratings;

  /// Judges and items in first-appearance order. Answer labels are the
  /// sorted set of labels seen; alignment labels are {"yes", "no"}.
  /// Throws incomplete_table for missing cells, duplicate_id for repeats.
  static RatingTable from_records(const std::vector<judge::JudgmentRecord>& records, Field field);

  /// Throws incomplete_table / unknown_label.
  void validate() const;
  std::size_t judge_index(std::string_view judge) const;
  /// Items x labels count grid over a subset of judges.
  std::vector<std::vector<std::size_t>> counts(const std::vector<std::string>& subset) const;
};

/// Strict plurality per item over `subset` (all judges when empty); kTie
/// where no label has a strict plurality.
std::vector<std::string> majority(const RatingTable& table,
                                  const std::vector<std::string>& subset = {});

double fleiss_subset(const RatingTable& table, const std::vector<std::string>& subset);

struct GroupStat {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t pairs = 0;
};

struct MachineStats {
  std::string judge;
  std::size_t scored = 0;   // items with a non-tie majority
  std::size_t correct = 0;  // of those, items matching the majority
  double accuracy = 0.0;
  Kappa kappa_vs_majority;
  std::vector<std::vector<std::size_t>> confusion_vs_majority;  // rows: majority
};

struct AgreementReport {
  Field field = Field::answer;
  std::vector<std::string> judges;
  std::vector<std::string> humans;
  std::vector<std::string> machines;
  std::vector<std::string> labels;
  /// Symmetric; the diagonal is NaN and excluded from every mean.
  std::vector<std::vector<double>> pairwise;
  std::vector<std::pair<std::string, std::string>> degenerate_pairs;
  GroupStat all_pairs;
  GroupStat human_human;
  std::map<std::string, GroupStat> machine_human;
  GroupStat machine_machine;
  double fleiss_all = 0.0;
  std::optional<double> fleiss_humans;
  std::map<std::string, double> fleiss_humans_plus;
  std::vector<std::string> items;
  std::vector<std::string> majority_labels;  // over humans (all judges if none)
  std::size_t majority_ties = 0;
  std::vector<MachineStats> machine_stats;
};

GroupStat group_stat(const std::vector<double>& values);

/// Judges listed in machine_judges are machines; everyone else is human.
AgreementReport report(const RatingTable& table, const std::vector<std::string>& machine_judges,
                       Field field = Field::answer);

std::string report_json(const AgreementReport& r);
/// Long format: section,key,judge_a,judge_b,value.
std::string report_csv(const AgreementReport& r);
/// Square grid with judge ids on both axes; the diagonal is left empty.
std::string heatmap_csv(const AgreementReport& r);

}  // namespace qgen::agreement
