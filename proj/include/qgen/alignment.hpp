// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * @file alignment.hpp
 * @brief Learning-objective alignment by log-probability lift.
 *
 *   relevance(L, Q) = log Pr(Q | L) - log Pr(Q)
 *
 * Q is the rendered question block (stem, labeled choices, "Answer: x").
 * log Pr(Q | L) scores the block after a context that states L; log Pr(Q)
 * scores the same block from an empty context. A question survives when its
 * origin LO is the unique argmax of its relevance column.
 */

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qgen/gateway.hpp"
#include "qgen/question_bank.hpp"
#include "qgen/templates.hpp"

namespace qgen::alignment {

inline constexpr std::string_view kMisaligned = "misaligned-lo";
inline constexpr std::string_view kAlignmentTie = "alignment-tie";

struct RelevanceMatrix {
  std::vector<std::string> lo_ids;
  std::vector<std::string> question_ids;
  /// scores[i][j] = relevance(lo_ids[i], question_ids[j]).
  std::vector<std::vector<double>> scores;

  /// Throws unless the grid matches the id lists and every entry is finite.
  void validate() const;
};

enum class Scoring {
  /// log Pr(Q|L) - log Pr(Q)
  lift,
  /// log Pr(Q|L) only; same argmax as lift for a fixed Q
  conditional_only,
};

struct Options {
  Scoring scoring = Scoring::lift;
  /// Divide each log-probability by the number of scored tokens.
  bool length_normalized = false;
};

/// Question block exactly as scored: stem, original-order labeled choices,
/// and the answer line.
std::string question_block(const Question& q, const TemplateSet& templates);
std::string lo_context(const LearningObjective& lo, const TemplateSet& templates);

/// One (LO, question) pair, two scoring calls.
double relevance(const Gateway& gateway, const LearningObjective& lo, const Question& q,
                 const TemplateSet& templates, const Options& options = {});

/// Full matrix; the baseline term is scored once per question and cells are
/// computed in parallel.
RelevanceMatrix relevance_matrix(const Gateway& gateway,
                                 const std::vector<LearningObjective>& los,
                                 const std::vector<Question>& questions,
                                 const TemplateSet& templates, const Options& options = {});

/// Same matrix via one relevance() call per cell.
RelevanceMatrix relevance_matrix_per_pair(const Gateway& gateway,
                                          const std::vector<LearningObjective>& los,
                                          const std::vector<Question>& questions,
                                          const TemplateSet& templates,
                                          const Options& options = {});

struct ColumnDecision {
  std::optional<std::size_t> best;  // nullopt on a tie for the maximum
  bool aligned = false;
};

/// Argmax over column j; ties are never aligned.
ColumnDecision decide_column(const RelevanceMatrix& m, std::size_t j, const std::string& origin_lo);

struct AlignResult {
  std::vector<Question> retained;
  std::vector<Question> rejected;
  RelevanceMatrix matrix;
};

/// Needs at least two LOs and questions at confidence-pass. Records each
/// question's relevance column; retained questions move to alignment-pass.
AlignResult align_filter(const Gateway& gateway, std::vector<Question> questions,
                         const std::vector<LearningObjective>& los, const TemplateSet& templates,
                         const Options& options = {});

/// CSV: header "lo_id,<question ids...>", one row per LO.
std::string matrix_csv(const RelevanceMatrix& m);
void write_matrix_csv(const RelevanceMatrix& m, const std::filesystem::path& path);

}  // namespace qgen::alignment
