#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "lexanon/config.hpp"
#include "lexanon/core.hpp"
#include "lexanon/gateway.hpp"
#include "lexanon/prompt_registry.hpp"
#include "lexanon/trace.hpp"

namespace lexanon {

inline constexpr std::string_view kNoGuess = "<no-guess>";

/// Exactly k ranked guesses, padded with kNoGuess.
struct GuessList {
  std::vector<std::string> guesses;
};

/// Reads numbered ("1.", "2)", "(3)") or bulleted ("-", "*") lines into a
/// ranked list, pads to k and truncates beyond it. Throws ParseError when no
/// list line is found.
GuessList parse_guess_list(std::string_view raw, int k);

struct MatchOptions {
  bool surname_match = false;
};

/// Named-person mode compares case-folded names with surrounding punctuation
/// stripped, internal separators (".", ",", "-", "_", "/") read as spaces and
/// whitespace collapsed; leading honorifics may be dropped on either side.
/// Categorical mode is case-folded exact equality.
bool match_identity(std::string_view guess, std::string_view identity, AttributeKind kind,
                    MatchOptions options = {});

/// Name normalization used by match_identity (named-person mode).
std::string normalize_name(std::string_view s);

struct PrivacyEvaluation {
  int p = 1;
  PrivacyFeedback feedback;
  std::vector<CallRecord> calls;
  std::vector<std::string> errors;
};

/// The rank-based privacy objective with clue feedback.
class PrivacyEvaluator {
 public:
  PrivacyEvaluator(Gateway& gateway, const PromptRegistry& registry, const RunConfig& config);

  /// Unparseable guess lists (after one format re-prompt) degrade to p = 1
  /// and are reported in `errors`. Gateway failures propagate.
  PrivacyEvaluation evaluate(std::string_view text, std::string_view identity,
                             AttributeKind kind, std::string_view record_id = {}) const;

 private:
  Gateway& gateway_;
  const PromptRegistry& registry_;
  RunConfig config_;
};

}  // namespace lexanon
