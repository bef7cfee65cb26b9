#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lexanon/config.hpp"
#include "lexanon/gateway.hpp"
#include "lexanon/prompt_registry.hpp"
#include "lexanon/trace.hpp"

namespace lexanon {

/// The first numeric token of `reply`, if it lies in [lo, hi].
std::optional<int> parse_score(std::string_view reply, int lo, int hi);

struct UtilityEvaluation {
  int u = 0;
  std::vector<CallRecord> calls;
  std::vector<std::string> errors;
};

class UtilityEvaluator {
 public:
  virtual ~UtilityEvaluator() = default;

  /// Throws PreconditionError on empty text. Unresolvable scores degrade to
  /// u = 0 and are reported in `errors`.
  virtual UtilityEvaluation evaluate(std::string_view text, std::string_view label,
                                     std::string_view record_id, int iteration) const = 0;
};

/// Asks a judge model how confidently the text supports the label.
class JudgeUtilityEvaluator : public UtilityEvaluator {
 public:
  JudgeUtilityEvaluator(Gateway& gateway, const PromptRegistry& registry,
                        const RunConfig& config);

  UtilityEvaluation evaluate(std::string_view text, std::string_view label,
                             std::string_view record_id, int iteration) const override;

 private:
  Gateway& gateway_;
  const PromptRegistry& registry_;
  RunConfig config_;
};

/// Scores produced offline by the downstream classifier, keyed by
/// (record id, iteration).
class PredictionTable {
 public:
  /// JSON-lines of {record_id, iteration, score}. Duplicate keys throw.
  static PredictionTable load(const std::filesystem::path& path);
  static PredictionTable parse(std::istream& in);

  void insert(std::string record_id, int iteration, int score);
  /// Throws EvaluationError on a miss.
  int lookup(std::string_view record_id, int iteration) const;
  std::size_t size() const { return scores_.size(); }

 private:
  std::map<std::pair<std::string, int>, int, std::less<>> scores_;
};

class TableUtilityEvaluator : public UtilityEvaluator {
 public:
  TableUtilityEvaluator(PredictionTable table, const RunConfig& config);

  UtilityEvaluation evaluate(std::string_view text, std::string_view label,
                             std::string_view record_id, int iteration) const override;

 private:
  PredictionTable table_;
  RunConfig config_;
};

}  // namespace lexanon
