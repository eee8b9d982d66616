// SPDX-License-Identifier: Apache-2.0
#include "qgen/templates.hpp"

#include "json.hpp"
#include "qgen/error.hpp"
#include "qgen/question_bank.hpp"
#include "qgen/seeding.hpp"

namespace qgen {
namespace {

bool is_placeholder_name(std::string_view s) {
  if (s.empty() || s.front() == ' ' || s.back() == ' ') return false;
  char prev = 'x';
  for (char c : s) {
    if (c == ' ' && prev == ' ') return false;
    if (c != ' ' && !(c >= 'a' && c <= 'z')) return false;
    prev = c;
  }
  return true;
}

}  // namespace

TemplateSet TemplateSet::defaults() {
  TemplateSet t;
  t.entries_ = {
      {"seed.action",
       "The exercises below are designed to test whether a student is able to "
       "{learning objective}."},
      {"seed.content",
       "The exercises below are designed to test whether a student understands the following "
       "facts: {learning objective}"},
      {"stem.directive",
       "\n\nExercise: Create a multiple-choice question with {number of choices} answer "
       "choices.\nQuestion:"},
      {"choice.anchor", "{label})"},
      {"answer.directive", "Answer:"},
      {"explanation.directive", "Explanation:"},
      {"confidence.prompt", "{stem}\n{choices}\nAnswer:"},
      {"relevance.context", "{learning objective}\n\n"},
      {"relevance.question", "{stem}\n{choices}\nAnswer: {answer label}"},
      {"judge.answer.user",
       "You are taking a science test. Read the multiple-choice question below and answer it as "
       "if you were a student. Select one of the provided answer choices.\n\nQ1. {stem}\n"
       "{choices}"},
      {"judge.answer.prefix", "The answer to Q1 is **"},
      {"judge.alignment.user",
       "Now resume your role as an expert science teacher. Does the question Q1 you just "
       "answered test students on the following learning objective?\n\nLearning objective: "
       "{learning objective}\n\nAnswer Yes or No."},
      {"judge.alignment.prefix", "My answer is **"},
      {"nota.text", "None of the above"},
      {"role.user", "User: "},
      {"role.assistant", "Assistant: "},
  };
  return t;
}

TemplateSet TemplateSet::from_json_text(std::string_view json_text, const std::string& source) {
  TemplateSet t = defaults();
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
    t.version_ = doc.at("version").get<std::string>();
    const auto entries = doc.value("templates", nlohmann::json::object());
    for (const auto& [key, value] : entries.items()) {
      if (!t.entries_.count(key)) {
        throw ParseError(source, 0, "unknown template key '" + key + "'");
      }
      t.entries_[key] = value.get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(source, 0, e.what());
  }
  return t;
}

TemplateSet TemplateSet::from_file(const std::filesystem::path& path) {
  return from_json_text(read_text_file(path), path.string());
}

const std::string& TemplateSet::get(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw Error(ErrorCode::precondition, "no template '" + key + "'");
  return it->second;
}

void TemplateSet::set(const std::string& key, std::string value) {
  entries_[key] = std::move(value);
}

std::string TemplateSet::digest() const {
  std::string all = version_;
  for (const auto& [k, v] : entries_) {
    all += '\x1e' + k + '\x1f' + v;
  }
  return content_digest(all);
}

std::string render(std::string_view tmpl, const TemplateVars& vars) {
  std::string out;
  out.reserve(tmpl.size() + 64);
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find('{', pos);
    if (open == std::string_view::npos) break;
    const auto close = tmpl.find('}', open + 1);
    if (close == std::string_view::npos) break;
    const auto name = tmpl.substr(open + 1, close - open - 1);
    if (!is_placeholder_name(name)) {
      out.append(tmpl.substr(pos, open + 1 - pos));
      pos = open + 1;
      continue;
    }
    const auto it = vars.find(name);
    if (it == vars.end()) {
      throw Error(ErrorCode::precondition, "template placeholder {" + std::string(name) +
                                               "} has no value");
    }
    out.append(tmpl.substr(pos, open - pos));
    out.append(it->second);
    pos = close + 1;
  }
  out.append(tmpl.substr(pos));
  return out;
}

}  // namespace qgen
