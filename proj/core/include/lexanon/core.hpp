#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lexanon {

/// How a record's protected value is compared against adversary guesses.
enum class AttributeKind { named_person, categorical };

std::string_view to_string(AttributeKind kind);
AttributeKind attribute_kind_from_string(std::string_view name);

/// One corpus item.
struct Record {
  std::string id;
  std::string original_text;
  std::string identity;    // protected ground truth
  std::string task_label;  // downstream label the rewrite must keep supporting
  std::optional<AttributeKind> attribute_kind;

  AttributeKind kind() const { return attribute_kind.value_or(AttributeKind::named_person); }

  /// Throws CorpusError when a field invariant is broken.
  void validate() const;
};

/// Shared scale of a run: privacy scores live in [1, k+1], utility in [0, u_scale].
struct ObjectiveBounds {
  int k_guesses = 10;
  int u_scale = 100;

  int privacy_max() const { return k_guesses + 1; }
  friend bool operator==(const ObjectiveBounds&, const ObjectiveBounds&) = default;
};

/// Privacy rank score p and utility confidence u for one candidate text.
///
/// Construction checks both components against the run's bounds, so any
/// vector that exists is in range.
class ObjectiveVector {
 public:
  ObjectiveVector(int privacy, int utility, ObjectiveBounds bounds);

  int privacy() const { return privacy_; }
  int utility() const { return utility_; }

  friend bool operator==(const ObjectiveVector&, const ObjectiveVector&) = default;

 private:
  int privacy_;
  int utility_;
};

enum class LexOrder { a_preferred, b_preferred, equal };

/// Privacy strictly first, utility only breaks privacy ties.
LexOrder lex_compare(const ObjectiveVector& a, const ObjectiveVector& b);

/// True when `a` is strictly lexicographically preferred to `b`.
inline bool lex_prefers(const ObjectiveVector& a, const ObjectiveVector& b) {
  return lex_compare(a, b) == LexOrder::a_preferred;
}

/// Evaluator feedback attached to a memory entry.
struct PrivacyFeedback {
  std::string clues;                 // empty unless the identity was re-identified
  std::vector<std::string> guesses;  // ranked, rank 1 first
  std::optional<int> matched_rank;   // 1-based rank of the first matching guess

  /// Throws PreconditionError on a broken invariant.
  void validate(int k_guesses) const;
};

struct MemoryEntry {
  int iteration = 0;
  std::string text;
  ObjectiveVector objectives;
  std::optional<PrivacyFeedback> feedback;
};

/// Optimizer history: entries with consecutive iterations starting at 0.
class Memory {
 public:
  Memory() = default;

  /// Appends `entry`; its iteration must equal size().
  void append(MemoryEntry entry);

  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  const MemoryEntry& back() const { return entries_.back(); }
  const MemoryEntry& operator[](std::size_t i) const { return entries_[i]; }
  std::span<const MemoryEntry> entries() const { return entries_; }

 private:
  std::vector<MemoryEntry> entries_;
};

/// Entry that no other entry lex-dominates; ties go to the highest iteration.
/// Throws EvaluationError on an empty memory.
const MemoryEntry& select_lex_max(std::span<const MemoryEntry> entries);
inline const MemoryEntry& select_lex_max(const Memory& memory) {
  return select_lex_max(memory.entries());
}

/// Logical prompt roles. Gateway request tags mirror this list.
enum class PromptName {
  privacy_infer,
  privacy_feedback,
  utility_eval,
  optimizer_frame,
  meta_privacy,
  meta_utility,
  eval_confidence,
  eval_candidate_gen,
  eval_candidate_select,
  eval_categorical_select,
  format_reminder,
};

inline constexpr PromptName kAllPromptNames[] = {
    PromptName::privacy_infer,         PromptName::privacy_feedback,
    PromptName::utility_eval,          PromptName::optimizer_frame,
    PromptName::meta_privacy,          PromptName::meta_utility,
    PromptName::eval_confidence,       PromptName::eval_candidate_gen,
    PromptName::eval_candidate_select, PromptName::eval_categorical_select,
    PromptName::format_reminder,
};

std::string_view to_string(PromptName name);
/// Throws TemplateError for an unknown name.
PromptName prompt_name_from_string(std::string_view name);

}  // namespace lexanon
