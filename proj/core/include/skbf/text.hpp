#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace skbf::text {

/// Base form used for alias and label comparison: lowercase, Unicode NFC,
/// runs of whitespace collapsed to one space, leading/trailing punctuation
/// and whitespace removed. Invalid UTF-8 sequences become U+FFFD.
std::string normalize(std::string_view utf8);

/// Decodes UTF-8 into code points (invalid sequences become U+FFFD).
std::u32string to_code_points(std::string_view utf8);

/// Levenshtein distance over code points (unit insert/delete/substitute cost).
std::size_t levenshtein(std::u32string_view a, std::u32string_view b);

/// 1 - levenshtein(a, b) / max(|a|, |b|); two empty strings are identical (1.0).
double edit_similarity(std::u32string_view a, std::u32string_view b);

/// edit_similarity over the normalized forms of both inputs.
double normalized_similarity(std::string_view a, std::string_view b);

/// Longest prefix of `utf8` that fits in `max_bytes` without splitting a
/// multi-byte sequence.
std::string_view utf8_prefix(std::string_view utf8, std::size_t max_bytes);

}  // namespace skbf::text
