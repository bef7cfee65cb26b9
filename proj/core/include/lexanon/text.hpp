#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lexanon::text {

std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);
std::string collapse_whitespace(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);
std::vector<std::string> split_words(std::string_view s);

/// Drops leading and trailing whitespace, ASCII punctuation, and common
/// typographic quotes.
std::string strip_surrounding_punct(std::string_view s);

/// First numeric token in `s`, rounded to the nearest integer.
std::optional<long long> first_number(std::string_view s);

/// Approximate token count (whitespace-separated words); used by backends
/// that do not report usage.
int approx_tokens(std::string_view s);

}  // namespace lexanon::text
