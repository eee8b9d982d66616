// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace qgen::text {

/// Trim, collapse internal whitespace runs to one space, ASCII-lowercase.
std::string canonicalize(std::string_view s);

/// Trim plus whitespace collapsing, case preserved.
std::string normalize_space(std::string_view s);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

/// Number of Unicode scalar values in a UTF-8 string. Invalid lead bytes
/// count as one scalar each.
std::size_t scalar_count(std::string_view utf8);

/// First whitespace-delimited word, or empty.
std::string_view first_word(std::string_view s);

bool starts_with(std::string_view s, std::string_view prefix);
bool ends_with(std::string_view s, std::string_view suffix);

std::vector<std::string> split(std::string_view s, char delim);

/// Choice label for a zero-based position: 0 -> "a", 1 -> "b", ...
std::string label_for(std::size_t index);

/// Inverse of label_for; returns npos-like SIZE_MAX for non-labels.
std::size_t index_of_label(std::string_view label);

}  // namespace qgen::text
