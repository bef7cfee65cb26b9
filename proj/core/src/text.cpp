#include "lexanon/text.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <regex>

namespace lexanon::text {

namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }

// UTF-8 quotes and dashes that models like to wrap answers in.
constexpr std::array<std::string_view, 8> kUnicodePunct = {
    "\xE2\x80\x9C", "\xE2\x80\x9D", "\xE2\x80\x98", "\xE2\x80\x99",
    "\xC2\xAB",     "\xC2\xBB",     "\xE2\x80\x94", "\xE2\x80\x93",
};

}  // namespace

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending = false;
  for (char c : s) {
    if (is_space(static_cast<unsigned char>(c))) {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(c);
  }
  return out;
}

std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto nl = s.find('\n', start);
    if (nl == std::string_view::npos) nl = s.size();
    auto line = s.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    start = nl + 1;
  }
  return lines;
}

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_space(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) words.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return words;
}

std::string strip_surrounding_punct(std::string_view s) {
  auto strip_front = [&]() {
    if (s.empty()) return false;
    auto c = static_cast<unsigned char>(s.front());
    if (c < 0x80 && (is_space(c) || std::ispunct(c))) {
      s.remove_prefix(1);
      return true;
    }
    for (auto p : kUnicodePunct) {
      if (s.starts_with(p)) {
        s.remove_prefix(p.size());
        return true;
      }
    }
    return false;
  };
  auto strip_back = [&]() {
    if (s.empty()) return false;
    auto c = static_cast<unsigned char>(s.back());
    if (c < 0x80 && (is_space(c) || std::ispunct(c))) {
      s.remove_suffix(1);
      return true;
    }
    for (auto p : kUnicodePunct) {
      if (s.ends_with(p)) {
        s.remove_suffix(p.size());
        return true;
      }
    }
    return false;
  };
  while (strip_front()) {
  }
  while (strip_back()) {
  }
  return std::string(s);
}

std::optional<long long> first_number(std::string_view s) {
  static const std::regex kNumber(R"((-?)(\d+)(\.\d+)?)");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(s.begin(), s.end(), m, kNumber)) return std::nullopt;
  // A minus sign glued to a preceding word ("GPT-4") is a hyphen, not a sign.
  bool negative = m[1].length() > 0;
  if (negative && m.position(0) > 0) {
    auto prev = static_cast<unsigned char>(s[static_cast<std::size_t>(m.position(0)) - 1]);
    if (std::isalnum(prev)) negative = false;
  }
  const std::string digits = m[2].str() + m[3].str();
  if (digits.size() > 15) return std::nullopt;
  double value = std::stod(digits);
  if (negative) value = -value;
  return static_cast<long long>(std::llround(value));
}

int approx_tokens(std::string_view s) { return static_cast<int>(split_words(s).size()); }

}  // namespace lexanon::text
