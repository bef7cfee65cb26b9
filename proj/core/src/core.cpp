#include "lexanon/core.hpp"

#include <array>
#include <string>

#include "lexanon/error.hpp"

namespace lexanon {

std::string_view to_string(AttributeKind kind) {
  switch (kind) {
    case AttributeKind::named_person:
      return "named-person";
    case AttributeKind::categorical:
      return "categorical-attribute";
  }
  return "named-person";
}

AttributeKind attribute_kind_from_string(std::string_view name) {
  if (name == "named-person" || name == "named_person") return AttributeKind::named_person;
  if (name == "categorical-attribute" || name == "categorical" ||
      name == "categorical_attribute") {
    return AttributeKind::categorical;
  }
  throw CorpusError("unknown attribute_kind '" + std::string(name) + "'");
}

void Record::validate() const {
  if (id.empty()) throw CorpusError("record id must be nonempty");
  if (original_text.empty()) throw CorpusError("record '" + id + "': text must be nonempty");
  if (identity.empty()) throw CorpusError("record '" + id + "': identity must be nonempty");
}

ObjectiveVector::ObjectiveVector(int privacy, int utility, ObjectiveBounds bounds)
    : privacy_(privacy), utility_(utility) {
  if (privacy < 1 || privacy > bounds.privacy_max()) {
    throw PreconditionError("privacy score " + std::to_string(privacy) + " outside [1, " +
                            std::to_string(bounds.privacy_max()) + "]");
  }
  if (utility < 0 || utility > bounds.u_scale) {
    throw PreconditionError("utility score " + std::to_string(utility) + " outside [0, " +
                            std::to_string(bounds.u_scale) + "]");
  }
}

LexOrder lex_compare(const ObjectiveVector& a, const ObjectiveVector& b) {
  if (a.privacy() != b.privacy()) {
    return a.privacy() > b.privacy() ? LexOrder::a_preferred : LexOrder::b_preferred;
  }
  if (a.utility() != b.utility()) {
    return a.utility() > b.utility() ? LexOrder::a_preferred : LexOrder::b_preferred;
  }
  return LexOrder::equal;
}

void PrivacyFeedback::validate(int k_guesses) const {
  if (matched_rank && (*matched_rank < 1 || *matched_rank > k_guesses)) {
    throw PreconditionError("matched rank " + std::to_string(*matched_rank) +
                            " outside [1, K]");
  }
  if (clues.empty() == matched_rank.has_value()) {
    throw PreconditionError("clues must be present exactly when the identity matched");
  }
}

void Memory::append(MemoryEntry entry) {
  if (entry.iteration != static_cast<int>(entries_.size())) {
    throw PreconditionError("memory entry iteration " + std::to_string(entry.iteration) +
                            " does not follow " + std::to_string(entries_.size() - 1));
  }
  entries_.push_back(std::move(entry));
}

const MemoryEntry& select_lex_max(std::span<const MemoryEntry> entries) {
  if (entries.empty()) throw EvaluationError("run produced no candidates");
  const MemoryEntry* best = &entries.front();
  for (const auto& e : entries.subspan(1)) {
    const auto order = lex_compare(e.objectives, best->objectives);
    if (order == LexOrder::a_preferred ||
        (order == LexOrder::equal && e.iteration > best->iteration)) {
      best = &e;
    }
  }
  return *best;
}

namespace {

constexpr std::array<std::string_view, std::size(kAllPromptNames)> kPromptNameStrings = {
    "privacy_infer",         "privacy_feedback",        "utility_eval",
    "optimizer_frame",       "meta_privacy",            "meta_utility",
    "eval_confidence",       "eval_candidate_gen",      "eval_candidate_select",
    "eval_categorical_select", "format_reminder",
};

}  // namespace

std::string_view to_string(PromptName name) {
  return kPromptNameStrings.at(static_cast<std::size_t>(name));
}

PromptName prompt_name_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kPromptNameStrings.size(); ++i) {
    if (kPromptNameStrings[i] == name) return kAllPromptNames[i];
  }
  throw TemplateError("unknown prompt name '" + std::string(name) + "'");
}

}  // namespace lexanon
