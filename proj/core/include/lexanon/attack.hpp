#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lexanon/core.hpp"
#include "lexanon/gateway.hpp"
#include "lexanon/prompt_registry.hpp"

namespace lexanon {

/// Re-identification by selection: the adversary sees an anonymized text and
/// a candidate list containing the truth exactly once.
struct AttackInstance {
  std::string record_id;
  std::string anonymized_text;
  std::vector<std::string> candidates;
  int truth_index = 0;  // 0-based
  std::uint64_t shuffle_seed = 0;
  bool categorical = false;
};

struct AttackConfig {
  int n_candidates = 5;
  std::uint64_t seed = 0;
  std::vector<std::string> categorical_options;  // used for categorical records
  std::string profile = "biography";
  std::string model_id = "gpt-4";
  double temperature = 0.0;
  int max_output_tokens = 512;
};

struct DroppedInstance {
  std::string record_id;
  std::string reason;
};

struct AttackSet {
  std::vector<AttackInstance> instances;
  std::vector<DroppedInstance> dropped;
};

/// Truth position for one record: a pure function of (seed, record id).
int truth_position(std::uint64_t seed, std::string_view record_id, int n_candidates,
                   std::uint64_t* derived_seed = nullptr);

/// One instance per record that has an anonymized text. Named-person records
/// get n-1 generated decoys (one re-elicitation when they collide with the
/// truth or with each other); categorical records use the fixed option list.
AttackSet build_attack_set(const std::vector<Record>& records,
                           const std::map<std::string, std::string>& anonymized,
                           const AttackConfig& config, Gateway& gateway,
                           const PromptRegistry& registry);

struct InstanceOutcome {
  std::string record_id;
  int pick = -1;  // 0-based, -1 when unparseable
  bool success = false;
  bool flagged = false;
};

struct SuccessRateReport {
  double success_rate = 0.0;  // percent
  int instances = 0;
  int successes = 0;
  int flagged = 0;
  int n_candidates = 0;
  std::vector<InstanceOutcome> outcomes;  // record-id order
};

/// SR = 100 * correct picks / instances. Unparseable picks count as failures
/// and are flagged. Throws PreconditionError on an empty instance list.
SuccessRateReport success_rate(const std::vector<AttackInstance>& instances,
                               const AttackConfig& config, Gateway& gateway,
                               const PromptRegistry& registry);

/// Adversary pick from a selection reply: the first integer in [1, n], else
/// the single candidate named verbatim in the reply.
std::optional<int> parse_pick(std::string_view reply, const std::vector<std::string>& candidates);

struct ConfidenceReport {
  double mean = 0.0;
  std::map<std::string, int> scores;
  std::vector<std::string> flagged;
};

/// Judge-rated 0-100 linkage between each anonymized text and its truth.
/// Throws PreconditionError when no record has an anonymized text.
ConfidenceReport confidence_score(const std::vector<Record>& records,
                                  const std::map<std::string, std::string>& anonymized,
                                  const AttackConfig& config, Gateway& gateway,
                                  const PromptRegistry& registry);

nlohmann::json to_json(const AttackInstance& instance);
AttackInstance attack_instance_from_json(const nlohmann::json& j);

}  // namespace lexanon
