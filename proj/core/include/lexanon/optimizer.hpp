#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lexanon/config.hpp"
#include "lexanon/core.hpp"
#include "lexanon/error.hpp"
#include "lexanon/gateway.hpp"
#include "lexanon/privacy_evaluator.hpp"
#include "lexanon/prompt_registry.hpp"
#include "lexanon/trace.hpp"
#include "lexanon/utility_evaluator.hpp"

namespace lexanon {

/// Delimiters the optimizer frame template asks the model to wrap its
/// rewrite in.
inline constexpr std::string_view kRewriteOpen = "<rewrite>";
inline constexpr std::string_view kRewriteClose = "</rewrite>";

/// The optimizer reply held no extractable rewrite.
class StepError : public EvaluationError {
 public:
  using EvaluationError::EvaluationError;
};

/// Privacy mode until p reaches K+1, utility mode afterwards. The
/// privacy_only ablation pins privacy mode.
OptimizerMode choose_mode(const ObjectiveVector& current, const RunConfig& config);

/// Trimmed text between the last complete pair of rewrite delimiters.
std::optional<std::string> extract_rewrite(std::string_view reply);

struct StepResult {
  std::string text;
  std::vector<CallRecord> calls;
};

struct RecordOutcome {
  OptimizationTrace trace;
  MemoryEntry final_entry;
};

/// Lexicographic rewrite loop for one record.
///
/// Each iteration evaluates the candidate for privacy and utility, appends it
/// to memory and, unless a stop condition holds, renders the optimizer frame
/// with the mode's meta instruction and asks for the next rewrite. Utility
/// mode rewrites are re-scored for privacy; a regression switches the next
/// step back to privacy mode.
class Optimizer {
 public:
  Optimizer(Gateway& gateway, const PromptRegistry& registry, const RunConfig& config,
            const UtilityEvaluator& utility);

  /// The exact prompt a step would send.
  std::string render_step_prompt(const Memory& memory, const PrivacyFeedback& feedback,
                                 OptimizerMode mode) const;

  /// Throws PreconditionError on empty memory and StepError when neither the
  /// reply nor one format re-prompt contains a rewrite.
  StepResult step(const Memory& memory, const PrivacyFeedback& feedback, OptimizerMode mode,
                  std::string_view record_id = {}) const;

  /// Never throws for evaluator or backend failures: they seal the trace with
  /// StopReason::evaluation_error. An invalid record throws CorpusError.
  RecordOutcome run_record(const Record& record) const;

 private:
  Gateway& gateway_;
  const PromptRegistry& registry_;
  RunConfig config_;
  PrivacyEvaluator privacy_;
  const UtilityEvaluator& utility_;
};

}  // namespace lexanon
