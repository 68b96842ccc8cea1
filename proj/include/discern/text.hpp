#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace discern::text {

/// Abbreviations that never end a sentence even when followed by whitespace.
const std::vector<std::string>& abbreviation_guard();

/// Collapses every run of ASCII whitespace to one space and trims both ends.
std::string normalize_whitespace(std::string_view s);

/// Splits into sentences at '.', '!' or '?' directly followed by whitespace
/// (or end of text), unless the word carrying the terminator is a guarded
/// abbreviation. Joining the result with single spaces reproduces
/// normalize_whitespace(s). Text without a boundary is one sentence; empty
/// or all-blank text yields an empty list.
std::vector<std::string> split_sentences(std::string_view s);

/// Whitespace tokenization; punctuation stays attached to its word.
std::vector<std::string> tokenize_words(std::string_view s);

/// Joins with single spaces.
std::string join(const std::vector<std::string>& parts, std::string_view sep = " ");

/// Extended grapheme clusters of a UTF-8 string, each as its UTF-8 bytes.
std::vector<std::string> graphemes(std::string_view utf8);

/// Whether the cluster's base code point is a Unicode letter or decimal digit.
bool is_alnum_cluster(std::string_view cluster);

/// Whether the cluster's base code point is a Unicode letter.
bool is_letter_cluster(std::string_view cluster);

std::size_t count_graphemes(std::string_view utf8);

}  // namespace discern::text
