#include "lexanon/privacy_evaluator.hpp"

#include <array>
#include <regex>

#include "conversation.hpp"
#include "lexanon/error.hpp"
#include "lexanon/text.hpp"

namespace lexanon {

namespace {

constexpr std::array<std::string_view, 16> kHonorifics = {
    "mr", "mrs", "ms", "miss", "mx", "dr", "prof", "professor",
    "sir", "dame", "lord", "lady", "rev", "hon", "madam", "mister",
};

bool is_honorific(std::string_view word) {
  for (auto h : kHonorifics) {
    if (word == h) return true;
  }
  return false;
}

std::string without_honorifics(const std::string& normalized) {
  auto words = text::split_words(normalized);
  std::size_t i = 0;
  while (i + 1 < words.size() && is_honorific(words[i])) ++i;
  std::string out;
  for (; i < words.size(); ++i) {
    if (!out.empty()) out.push_back(' ');
    out += words[i];
  }
  return out;
}

// Cuts trailing commentary a model may append to a list item.
std::string strip_item_commentary(std::string item) {
  for (std::string_view sep : {" - ", " \xE2\x80\x94 ", " \xE2\x80\x93 ", " (", ": "}) {
    auto pos = item.find(sep);
    if (pos != std::string::npos && pos > 0) item.resize(pos);
  }
  std::string out;
  for (std::size_t i = 0; i < item.size(); ++i) {
    if (item.compare(i, 2, "**") == 0) {
      ++i;
      continue;
    }
    out.push_back(item[i]);
  }
  return text::strip_surrounding_punct(out);
}

}  // namespace

GuessList parse_guess_list(std::string_view raw, int k) {
  if (k < 1) throw PreconditionError("k must be >= 1");
  static const std::regex kItem(
      R"(^\s*(?:\(?\d{1,3}\s*[\.\):]|[-*+]|)" "\xE2\x80\xA2" R"()\s+(.*\S)\s*$)");
  GuessList list;
  for (const auto& line : text::split_lines(raw)) {
    std::smatch m;
    if (!std::regex_match(line, m, kItem)) continue;
    auto item = strip_item_commentary(m[1].str());
    if (item.empty()) continue;
    if (static_cast<int>(list.guesses.size()) < k) list.guesses.push_back(std::move(item));
  }
  if (list.guesses.empty()) throw ParseError("no numbered or bulleted guesses in reply");
  while (static_cast<int>(list.guesses.size()) < k) list.guesses.emplace_back(kNoGuess);
  return list;
}

std::string normalize_name(std::string_view s) {
  std::string folded = text::to_lower_ascii(text::strip_surrounding_punct(s));
  for (auto& c : folded) {
    if (c == '.' || c == ',' || c == '-' || c == '_' || c == '/') c = ' ';
  }
  return text::collapse_whitespace(folded);
}

bool match_identity(std::string_view guess, std::string_view identity, AttributeKind kind,
                    MatchOptions options) {
  if (text::trim(guess) == kNoGuess) return false;
  if (kind == AttributeKind::categorical) {
    const auto g = text::to_lower_ascii(text::trim(guess));
    return !g.empty() && g == text::to_lower_ascii(text::trim(identity));
  }
  const auto g = normalize_name(guess);
  const auto y = normalize_name(identity);
  if (g.empty() || y.empty()) return false;
  if (g == y) return true;
  const auto g_bare = without_honorifics(g);
  const auto y_bare = without_honorifics(y);
  if (g_bare == y || g == y_bare || g_bare == y_bare) return true;
  if (options.surname_match) {
    const auto words = text::split_words(y_bare);
    if (words.size() >= 2 && g_bare == words.back()) return true;
  }
  return false;
}

PrivacyEvaluator::PrivacyEvaluator(Gateway& gateway, const PromptRegistry& registry,
                                   const RunConfig& config)
    : gateway_(gateway), registry_(registry), config_(config) {}

PrivacyEvaluation PrivacyEvaluator::evaluate(std::string_view candidate, std::string_view identity,
                                             AttributeKind kind, std::string_view record_id) const {
  if (text::trim(candidate).empty()) throw PreconditionError("privacy evaluation of empty text");
  const int k = config_.k_guesses;
  PrivacyEvaluation out;

  detail::Ask ask{gateway_,
                  registry_,
                  config_.dataset_profile,
                  config_.backend.model_id,
                  config_.backend.evaluator_temperature,
                  config_.backend.max_output_tokens,
                  RequestTag::privacy_infer,
                  std::string(record_id),
                  config_.backend.seed};
  const auto prompt = render(registry_.get(PromptName::privacy_infer, config_.dataset_profile),
                             {{"text", std::string(candidate)}, {"k", std::to_string(k)}});
  auto guesses = detail::ask_parsed(
      ask, prompt,
      "a numbered list of exactly " + std::to_string(k) +
          " guesses, one per line (\"1. guess\"), most likely first, with no other text",
      [k](const std::string& reply) -> std::optional<GuessList> { return parse_guess_list(reply, k); },
      out.calls);

  if (!guesses) {
    out.p = 1;
    out.errors.push_back("privacy_infer: unparseable guess list after re-prompt");
    return out;
  }
  out.feedback.guesses = std::move(guesses->guesses);

  const MatchOptions match_options{config_.surname_match};
  for (int i = 0; i < k; ++i) {
    if (match_identity(out.feedback.guesses[i], identity, kind, match_options)) {
      out.feedback.matched_rank = i + 1;
      break;
    }
  }
  if (!out.feedback.matched_rank) {
    out.p = k + 1;
    return out;
  }

  out.p = *out.feedback.matched_rank;
  ask.tag = RequestTag::privacy_feedback;
  const auto feedback_prompt =
      render(registry_.get(PromptName::privacy_feedback, config_.dataset_profile),
             {{"text", std::string(candidate)}, {"identity", std::string(identity)}});
  std::string reply;
  out.calls.push_back(detail::send(ask, {{Role::user, feedback_prompt}}, false, &reply));
  out.feedback.clues = text::trim(reply);
  if (out.feedback.clues.empty()) {
    out.feedback.clues = "The text still allows the evaluator to infer \"" +
                         std::string(identity) + "\" (rank " + std::to_string(out.p) + ").";
    out.errors.push_back("privacy_feedback: empty clue reply");
  }
  return out;
}

}  // namespace lexanon
