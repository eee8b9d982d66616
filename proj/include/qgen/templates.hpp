// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace qgen {

/// Named prompt templates. Placeholders are written `{name}` where name is
/// lowercase words separated by single spaces, e.g. `{learning objective}`.
/// Any other brace text is literal.
///
/// Keys used by the pipeline:
///   seed.action, seed.content          seeding statement per LO form
///   stem.directive                     create-an-MCQ directive ({number of choices})
///   choice.anchor                      per-choice anchor ({label})
///   answer.directive, explanation.directive
///   confidence.prompt                  ({stem}, {choices})
///   relevance.context, relevance.question
///   judge.answer.user, judge.answer.prefix
///   judge.alignment.user, judge.alignment.prefix
///   nota.text, role.user, role.assistant
class TemplateSet {
 public:
  /// Built-in templates, version "1".
  static TemplateSet defaults();

  /// Defaults overlaid with a JSON file {"version": "...", "templates": {...}}.
  /// Unknown keys are rejected so typos do not silently fall back.
  static TemplateSet from_file(const std::filesystem::path& path);
  static TemplateSet from_json_text(std::string_view json_text, const std::string& source);

  const std::string& get(const std::string& key) const;
  void set(const std::string& key, std::string value);
  const std::string& version() const { return version_; }
  const std::map<std::string, std::string>& entries() const { return entries_; }

  std::string digest() const;

 private:
  std::string version_ = "1";
  std::map<std::string, std::string> entries_;
};

using TemplateVars = std::map<std::string, std::string, std::less<>>;

/// Substitutes every `{name}` placeholder; throws precondition when a
/// placeholder has no value. Substituted values are not re-scanned.
std::string render(std::string_view tmpl, const TemplateVars& vars);

}  // namespace qgen
