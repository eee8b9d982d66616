// SPDX-License-Identifier: Apache-2.0
#include "qgen/generator.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "qgen/error.hpp"
#include "qgen/parallel.hpp"
#include "qgen/seeding.hpp"
#include "qgen/text.hpp"

namespace qgen {

void PromptState::advance(std::string_view more, PromptStep next) {
  if (static_cast<int>(next) != static_cast<int>(step_) + 1) {
    throw Error(ErrorCode::precondition, "prompt steps must advance one at a time");
  }
  text_ += more;
  step_ = next;
}

void GeneratorConfig::validate() const {
  if (choices_k < 2 || choices_k > 25) {
    throw Error(ErrorCode::precondition, "choices_k must be in [2, 25]");
  }
  if (batch_size == 0) throw Error(ErrorCode::precondition, "batch_size must be > 0");
  if (beam_width <= 0) throw Error(ErrorCode::precondition, "beam_width must be > 0");
  if (max_empty_batches <= 0) throw Error(ErrorCode::precondition, "max_empty_batches must be > 0");
}

std::string question_id(const std::string& lo_id, std::size_t index) {
  return fmt::format("{}-{:04}", lo_id, index);
}

Generator::Generator(const Gateway& gateway, TemplateSet templates, GeneratorConfig config)
    : gateway_(gateway), templates_(std::move(templates)), config_(std::move(config)) {
  config_.validate();
}

PromptState Generator::seed_prompt(const LearningObjective& lo) const {
  const auto& tmpl =
      templates_.get(lo.form == LoForm::action_based ? "seed.action" : "seed.content");
  return PromptState(render(tmpl, {{"learning objective", lo.text}}), PromptStep::seeded);
}

std::string Generator::stem_prompt(const LearningObjective& lo) const {
  return seed_prompt(lo).text() +
         render(templates_.get("stem.directive"),
                {{"number of choices", std::to_string(config_.choices_k)}});
}

std::string Generator::extract_stem(std::string_view raw) {
  const auto q = raw.find('?');
  if (q != std::string_view::npos) {
    const auto nl = raw.find('\n', q);
    if (nl != std::string_view::npos) raw = raw.substr(0, nl);
  }
  return text::trim(raw);
}

std::vector<std::string> Generator::generate_stems(const LearningObjective& lo, std::size_t n,
                                                   std::uint64_t seed) const {
  if (n == 0) throw Error(ErrorCode::precondition, "stem target must be > 0");
  const std::string prompt = stem_prompt(lo);
  auto params = DecodingParams::nucleus(config_.stem_temperature, config_.stem_top_p,
                                        config_.stem_max_tokens, 0);
  params.stop_sequences = {render(templates_.get("choice.anchor"), {{"label", "a"}})};

  std::vector<std::string> stems;
  int empty_batches = 0;
  for (std::uint64_t batch = 0; stems.size() < n; ++batch) {
    params.seed = derive_seed(seed, "stem-batch", batch);
    const std::size_t want = std::min(config_.batch_size, n - stems.size());
    std::size_t usable = 0;
    for (const auto& c : gateway_.complete_n(prompt, params, want)) {
      auto stem = extract_stem(c.text);
      if (stem.empty()) continue;
      stems.push_back(std::move(stem));
      ++usable;
    }
    if (usable == 0 && ++empty_batches >= config_.max_empty_batches) {
      throw Error(ErrorCode::zero_usable_output,
                  fmt::format("no usable stems for {} after {} batches", lo.id, empty_batches));
    }
    if (usable > 0) empty_batches = 0;
  }
  stems.resize(n);
  return stems;
}

PromptState Generator::with_stem(const LearningObjective& lo, const std::string& stem) const {
  PromptState state = seed_prompt(lo);
  const std::string directive = stem_prompt(lo).substr(state.text().size());
  state.advance(directive + " " + stem + "\n", PromptStep::stem_done);
  return state;
}

std::vector<std::string> Generator::generate_choices(PromptState& state, std::size_t k,
                                                     std::uint64_t seed) const {
  if (k < 2) throw Error(ErrorCode::precondition, "at least two choices are required");
  if (state.step() != PromptStep::stem_done) {
    throw Error(ErrorCode::precondition, "choices follow the stem step");
  }
  auto params = DecodingParams::beam(config_.beam_width, config_.choice_max_tokens);
  params.stop_sequences = {"\n"};

  std::vector<std::string> choices;
  for (std::size_t i = 0; i < k; ++i) {
    const std::string anchor = render(templates_.get("choice.anchor"), {{"label", text::label_for(i)}});
    params.seed = derive_seed(seed, "choice", i);
    const Completion c = gateway_.complete(state.text() + anchor, params);
    std::string choice = text::trim(c.text);
    if (choice.empty() && c.finish == FinishReason::end_of_text) {
      throw Error(ErrorCode::anchor_not_produced,
                  fmt::format("no continuation after anchor '{}'", anchor));
    }
    state.append(anchor + " " + choice + "\n");
    choices.push_back(std::move(choice));
  }
  state.advance("", PromptStep::choices_done);
  return choices;
}

AnswerSelection Generator::select_answer(PromptState& state,
                                         const std::vector<std::string>& choices) const {
  if (choices.empty()) throw Error(ErrorCode::precondition, "choices must be non-empty");
  if (state.step() != PromptStep::choices_done) {
    throw Error(ErrorCode::precondition, "answer selection follows the choices step");
  }
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < choices.size(); ++i) labels.push_back(text::label_for(i));

  const std::string& directive = templates_.get("answer.directive");
  AnswerSelection sel;
  sel.distribution = gateway_.label_distribution(state.text() + directive, labels);
  sel.index = argmax(sel.distribution, &sel.tie);
  if (sel.tie) spdlog::debug("answer tie, choosing lowest label '{}'", labels[sel.index]);

  state.advance(directive + " " + render(templates_.get("choice.anchor"), {{"label", labels[sel.index]}}) +
                    " " + choices[sel.index] + "\n",
                PromptStep::answer_done);
  return sel;
}

Explanation Generator::generate_explanation(PromptState& state) const {
  if (state.step() != PromptStep::answer_done) {
    throw Error(ErrorCode::precondition, "explanation follows the answer step");
  }
  const std::string& directive = templates_.get("explanation.directive");
  auto params = DecodingParams::greedy(config_.explanation_max_tokens);
  params.stop_sequences = config_.explanation_stops;
  const Completion c = gateway_.complete(state.text() + directive, params);
  Explanation e{text::trim(c.text), c.truncated()};
  state.advance(directive + " " + e.text, PromptStep::explanation_done);
  return e;
}

Question Generator::build_question(const LearningObjective& lo, const std::string& stem,
                                   std::string id, std::uint64_t seed) const {
  Question q;
  q.id = std::move(id);
  q.origin_lo = lo.id;
  q.stem = stem;
  q.generation_seed = seed;

  PromptState state = with_stem(lo, stem);
  try {
    q.choices = generate_choices(state, config_.choices_k, seed);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::anchor_not_produced) throw;
    // Keep the candidate; the empty choices fail syntactic screening.
    spdlog::debug("{}: {}", q.id, e.what());
    q.flags.push_back("anchor-not-produced");
    state = with_stem(lo, stem);
    for (std::size_t i = 0; i < config_.choices_k; ++i) {
      q.choices.emplace_back();
      state.append(render(templates_.get("choice.anchor"), {{"label", text::label_for(i)}}) + " \n");
    }
    state.advance("", PromptStep::choices_done);
  }

  const AnswerSelection sel = select_answer(state, q.choices);
  q.answer_index = sel.index;
  if (sel.tie) q.flags.push_back("answer-tie");

  const Explanation expl = generate_explanation(state);
  q.explanation = expl.text;
  if (expl.truncated) q.flags.push_back("explanation-truncated");
  return q;
}

std::vector<Question> Generator::generate_for_objective(const LearningObjective& lo,
                                                        std::size_t n, std::uint64_t seed) const {
  const auto stems = generate_stems(lo, n, derive_seed(seed, "stems"));
  std::vector<Question> out(stems.size());
  parallel_for(stems.size(), gateway_.concurrency(), [&](std::size_t i) {
    out[i] = build_question(lo, stems[i], question_id(lo.id, i + 1),
                            derive_seed(seed, "question", i));
  });
  return out;
}

std::vector<Question> Generator::generate(const std::vector<LearningObjective>& los,
                                          std::size_t per_lo, std::uint64_t seed) const {
  std::vector<Question> all;
  all.reserve(los.size() * per_lo);
  for (const auto& lo : los) {
    auto qs = generate_for_objective(lo, per_lo, derive_seed(seed, lo.id));
    std::move(qs.begin(), qs.end(), std::back_inserter(all));
  }
  return all;
}

}  // namespace qgen
