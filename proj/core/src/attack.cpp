#include "lexanon/attack.hpp"

#include <algorithm>
#include <random>
#include <set>

#include <spdlog/spdlog.h>

#include "conversation.hpp"
#include "lexanon/error.hpp"
#include "lexanon/privacy_evaluator.hpp"
#include "lexanon/text.hpp"
#include "lexanon/utility_evaluator.hpp"

namespace lexanon {

using nlohmann::json;

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::string numbered(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out.push_back('\n');
    out += std::to_string(i + 1) + ". " + items[i];
  }
  return out;
}

detail::Ask make_ask(Gateway& gateway, const PromptRegistry& registry, const AttackConfig& config,
                     RequestTag tag, std::string record_id) {
  return {gateway,          registry,           config.profile,
          config.model_id,  config.temperature, config.max_output_tokens,
          tag,              std::move(record_id), std::nullopt};
}

// Adds parsed decoys that are distinct from the truth and from each other.
// Returns true when some reply line collided with the truth.
bool collect_decoys(std::string_view reply, int wanted, const std::string& truth_norm,
                    std::set<std::string>& seen, std::vector<std::string>& decoys) {
  bool collided = false;
  GuessList parsed;
  try {
    parsed = parse_guess_list(reply, std::max(wanted * 2, wanted + 4));
  } catch (const ParseError&) {
    return false;
  }
  for (auto& g : parsed.guesses) {
    if (g == kNoGuess) continue;
    const auto norm = normalize_name(g);
    if (norm.empty()) continue;
    if (norm == truth_norm) {
      collided = true;
      continue;
    }
    if (seen.insert(norm).second && static_cast<int>(decoys.size()) < wanted) {
      decoys.push_back(std::move(g));
    }
  }
  return collided;
}

}  // namespace

int truth_position(std::uint64_t seed, std::string_view record_id, int n_candidates,
                   std::uint64_t* derived_seed) {
  if (n_candidates < 1) throw PreconditionError("n_candidates must be >= 1");
  const std::uint64_t derived = splitmix64(seed ^ fnv1a(record_id));
  if (derived_seed) *derived_seed = derived;
  std::mt19937_64 rng(derived);
  return static_cast<int>(rng() % static_cast<std::uint64_t>(n_candidates));
}

AttackSet build_attack_set(const std::vector<Record>& records,
                           const std::map<std::string, std::string>& anonymized,
                           const AttackConfig& config, Gateway& gateway,
                           const PromptRegistry& registry) {
  if (config.n_candidates < 2) throw PreconditionError("n_candidates must be >= 2");
  AttackSet set;
  for (const auto& record : records) {
    auto it = anonymized.find(record.id);
    if (it == anonymized.end()) {
      set.dropped.push_back({record.id, "no anonymized text"});
      continue;
    }
    AttackInstance inst;
    inst.record_id = record.id;
    inst.anonymized_text = it->second;

    if (record.kind() == AttributeKind::categorical) {
      inst.categorical = true;
      std::set<std::string> seen;
      int truth = -1;
      for (std::size_t i = 0; i < config.categorical_options.size(); ++i) {
        const auto& option = config.categorical_options[i];
        seen.insert(text::to_lower_ascii(text::trim(option)));
        if (truth < 0 && match_identity(option, record.identity, AttributeKind::categorical)) {
          truth = static_cast<int>(i);
        }
      }
      if (config.categorical_options.size() < 2 || seen.size() != config.categorical_options.size()) {
        set.dropped.push_back({record.id, "categorical options missing or not distinct"});
        continue;
      }
      if (truth < 0) {
        set.dropped.push_back({record.id, "truth '" + record.identity + "' not among the options"});
        continue;
      }
      inst.candidates = config.categorical_options;
      inst.truth_index = truth;
      set.instances.push_back(std::move(inst));
      continue;
    }

    const int wanted = config.n_candidates - 1;
    const auto truth_norm = normalize_name(record.identity);
    std::set<std::string> seen{truth_norm};
    std::vector<std::string> decoys;
    auto ask = make_ask(gateway, registry, config, RequestTag::eval_candidate_gen, record.id);
    const auto prompt = render(registry.get(PromptName::eval_candidate_gen, config.profile),
                               {{"identity", record.identity}, {"count", std::to_string(wanted)}});
    std::vector<ChatMessage> messages{{Role::user, prompt}};
    std::string reply;
    detail::send(ask, messages, false, &reply);
    const bool collided = collect_decoys(reply, wanted, truth_norm, seen, decoys);
    if (collided || static_cast<int>(decoys.size()) < wanted) {
      messages.push_back({Role::assistant, reply});
      messages.push_back(
          {Role::user,
           render(registry.get(PromptName::format_reminder, config.profile),
                  {{"expected_format", "a numbered list of " + std::to_string(wanted) +
                                           " distinct candidates, none of them \"" +
                                           record.identity + "\""}})});
      detail::send(ask, messages, true, &reply);
      collect_decoys(reply, wanted, truth_norm, seen, decoys);
    }
    if (static_cast<int>(decoys.size()) < wanted) {
      spdlog::warn("dropping attack instance '{}': only {} usable decoys", record.id, decoys.size());
      set.dropped.push_back({record.id, "only " + std::to_string(decoys.size()) +
                                            " distinct decoys after re-elicitation"});
      continue;
    }
    inst.truth_index =
        truth_position(config.seed, record.id, config.n_candidates, &inst.shuffle_seed);
    inst.candidates = std::move(decoys);
    inst.candidates.insert(inst.candidates.begin() + inst.truth_index, record.identity);
    set.instances.push_back(std::move(inst));
  }
  return set;
}

std::optional<int> parse_pick(std::string_view reply, const std::vector<std::string>& candidates) {
  const int n = static_cast<int>(candidates.size());
  if (auto number = parse_score(reply, 1, n)) return *number - 1;
  const auto haystack = " " + normalize_name(reply) + " ";
  std::optional<int> found;
  for (int i = 0; i < n; ++i) {
    const auto needle = normalize_name(candidates[i]);
    if (needle.empty()) continue;
    if (haystack.find(" " + needle + " ") != std::string::npos) {
      if (found) return std::nullopt;
      found = i;
    }
  }
  return found;
}

SuccessRateReport success_rate(const std::vector<AttackInstance>& instances,
                               const AttackConfig& config, Gateway& gateway,
                               const PromptRegistry& registry) {
  if (instances.empty()) throw PreconditionError("success rate over zero instances");
  SuccessRateReport report;
  report.n_candidates = config.n_candidates;
  for (const auto& inst : instances) {
    const auto name =
        inst.categorical ? PromptName::eval_categorical_select : PromptName::eval_candidate_select;
    const auto prompt = render(registry.get(name, config.profile),
                               {{"text", inst.anonymized_text},
                                {inst.categorical ? "options" : "candidates", numbered(inst.candidates)}});
    std::vector<CallRecord> calls;
    auto pick = detail::ask_parsed(
        make_ask(gateway, registry, config, name, inst.record_id), prompt,
        "only the number (1-" + std::to_string(inst.candidates.size()) + ") of your choice",
        [&](const std::string& reply) { return parse_pick(reply, inst.candidates); }, calls);
    InstanceOutcome outcome{inst.record_id, pick.value_or(-1), false, !pick.has_value()};
    outcome.success = pick && *pick == inst.truth_index;
    report.successes += outcome.success ? 1 : 0;
    report.flagged += outcome.flagged ? 1 : 0;
    report.outcomes.push_back(std::move(outcome));
  }
  std::sort(report.outcomes.begin(), report.outcomes.end(),
            [](const auto& a, const auto& b) { return a.record_id < b.record_id; });
  report.instances = static_cast<int>(instances.size());
  report.success_rate = 100.0 * report.successes / report.instances;
  return report;
}

ConfidenceReport confidence_score(const std::vector<Record>& records,
                                  const std::map<std::string, std::string>& anonymized,
                                  const AttackConfig& config, Gateway& gateway,
                                  const PromptRegistry& registry) {
  ConfidenceReport report;
  double total = 0;
  for (const auto& record : records) {
    auto it = anonymized.find(record.id);
    if (it == anonymized.end()) continue;
    const auto prompt = render(registry.get(PromptName::eval_confidence, config.profile),
                               {{"text", it->second}, {"identity", record.identity}});
    std::vector<CallRecord> calls;
    auto score = detail::ask_parsed(
        make_ask(gateway, registry, config, RequestTag::eval_confidence, record.id), prompt,
        "a single integer between 0 and 100 and nothing else",
        [](const std::string& reply) { return parse_score(reply, 0, 100); }, calls);
    if (!score) report.flagged.push_back(record.id);
    report.scores[record.id] = score.value_or(0);
    total += score.value_or(0);
  }
  if (report.scores.empty()) throw PreconditionError("confidence score over zero records");
  report.mean = total / static_cast<double>(report.scores.size());
  return report;
}

json to_json(const AttackInstance& inst) {
  return json{{"record_id", inst.record_id},
              {"anonymized_text", inst.anonymized_text},
              {"candidates", inst.candidates},
              {"truth_index", inst.truth_index},
              {"shuffle_seed", inst.shuffle_seed},
              {"categorical", inst.categorical}};
}

AttackInstance attack_instance_from_json(const json& j) {
  AttackInstance inst;
  inst.record_id = j.at("record_id").get<std::string>();
  inst.anonymized_text = j.at("anonymized_text").get<std::string>();
  inst.candidates = j.at("candidates").get<std::vector<std::string>>();
  inst.truth_index = j.at("truth_index").get<int>();
  inst.shuffle_seed = j.value("shuffle_seed", std::uint64_t{0});
  inst.categorical = j.value("categorical", false);
  return inst;
}

}  // namespace lexanon
