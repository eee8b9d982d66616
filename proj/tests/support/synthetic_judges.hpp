// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>
#include <string>
#include <vector>

#include "qgen/judge.hpp"
#include "qgen/text.hpp"

namespace synthetic {

/// Seven human judges P1..P7 and one machine judge over 64 items. Every item
/// has a strict human majority (five or more votes); the machine copies the
/// majority answer on `machine_hits` items and picks another label elsewhere.
inline std::vector<qgen::judge::JudgmentRecord> seven_judges(std::size_t machine_hits,
                                                             std::uint64_t seed = 7,
                                                             const std::string& machine = "machine") {
  std::mt19937_64 rng(seed);
  const std::size_t items = 64;
  std::vector<qgen::judge::JudgmentRecord> out;
  std::vector<std::string> truth;
  for (std::size_t i = 0; i < items; ++i) truth.push_back(qgen::text::label_for(rng() % 5));

  auto other = [&](const std::string& l) {
    std::string o;
    do o = qgen::text::label_for(rng() % 5);
    while (o == l);
    return o;
  };

  std::vector<std::vector<std::string>> human(7, std::vector<std::string>(items));
  for (std::size_t i = 0; i < items; ++i) {
    const std::size_t dissent = rng() % 3;  // 0..2 of 7 disagree
    for (std::size_t j = 0; j < 7; ++j) human[j][i] = truth[i];
    for (std::size_t d = 0; d < dissent; ++d) human[(i + d * 3) % 7][i] = other(truth[i]);
  }
  for (std::size_t j = 0; j < 7; ++j) {
    for (std::size_t i = 0; i < items; ++i) {
      qgen::judge::JudgmentRecord r;
      r.judge_id = "P" + std::to_string(j + 1);
      r.question_id = "Q" + std::to_string(i + 1);
      r.answer_label = human[j][i];
      r.alignment_verdict = (i + j) % 4 == 0 ? qgen::judge::Verdict::no : qgen::judge::Verdict::yes;
      out.push_back(r);
    }
  }
  for (std::size_t i = 0; i < items; ++i) {
    qgen::judge::JudgmentRecord r;
    r.judge_id = machine;
    r.question_id = "Q" + std::to_string(i + 1);
    r.answer_label = i < machine_hits ? truth[i] : other(truth[i]);
    r.alignment_verdict = i % 3 == 0 ? qgen::judge::Verdict::no : qgen::judge::Verdict::yes;
    out.push_back(r);
  }
  return out;
}

}  // namespace synthetic
