// SPDX-License-Identifier: Apache-2.0
#include "qgen/text.hpp"

#include <cstdint>
#include <limits>

namespace qgen::text {
namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

char lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

}  // namespace

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string normalize_space(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = lower(c);
  return out;
}

std::string canonicalize(std::string_view s) { return to_lower(normalize_space(s)); }

std::size_t scalar_count(std::string_view utf8) {
  std::size_t n = 0;
  for (unsigned char c : utf8) {
    // Continuation bytes (10xxxxxx) do not start a scalar.
    if ((c & 0xC0u) != 0x80u) ++n;
  }
  return n;
}

std::string_view first_word(std::string_view s) {
  std::size_t b = 0;
  while (b < s.size() && is_space(s[b])) ++b;
  std::size_t e = b;
  while (e < s.size() && !is_space(s[e])) ++e;
  return s.substr(b, e - b);
}

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::vector<std::string> split(std::string_view s, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(delim, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      return out;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string label_for(std::size_t index) {
  // Beyond 26 choices the labels would stop being single letters; k that large
  // is rejected upstream.
  return std::string(1, static_cast<char>('a' + index));
}

std::size_t index_of_label(std::string_view label) {
  if (label.size() != 1 || label[0] < 'a' || label[0] > 'z') {
    return std::numeric_limits<std::size_t>::max();
  }
  return static_cast<std::size_t>(label[0] - 'a');
}

}  // namespace qgen::text
