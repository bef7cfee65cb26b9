#include "lexanon/utility_evaluator.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "conversation.hpp"
#include "lexanon/error.hpp"
#include "lexanon/text.hpp"

namespace lexanon {

using nlohmann::json;

std::optional<int> parse_score(std::string_view reply, int lo, int hi) {
  auto n = text::first_number(reply);
  if (!n || *n < lo || *n > hi) return std::nullopt;
  return static_cast<int>(*n);
}

JudgeUtilityEvaluator::JudgeUtilityEvaluator(Gateway& gateway, const PromptRegistry& registry,
                                             const RunConfig& config)
    : gateway_(gateway), registry_(registry), config_(config) {}

UtilityEvaluation JudgeUtilityEvaluator::evaluate(std::string_view candidate, std::string_view label,
                                                  std::string_view record_id, int) const {
  if (text::trim(candidate).empty()) throw PreconditionError("utility evaluation of empty text");
  if (text::trim(label).empty()) throw PreconditionError("utility evaluation without a label");
  UtilityEvaluation out;
  const int scale = config_.u_scale;
  detail::Ask ask{gateway_,
                  registry_,
                  config_.dataset_profile,
                  config_.backend.model_id,
                  config_.backend.evaluator_temperature,
                  config_.backend.max_output_tokens,
                  RequestTag::utility_eval,
                  std::string(record_id),
                  config_.backend.seed};
  const auto prompt = render(registry_.get(PromptName::utility_eval, config_.dataset_profile),
                             {{"text", std::string(candidate)},
                              {"label", std::string(label)},
                              {"scale", std::to_string(scale)}});
  auto score = detail::ask_parsed(
      ask, prompt, "a single integer between 0 and " + std::to_string(scale) + " and nothing else",
      [scale](const std::string& reply) { return parse_score(reply, 0, scale); }, out.calls);
  if (score) {
    out.u = *score;
  } else {
    out.u = 0;
    out.errors.push_back("utility_eval: no score in [0, " + std::to_string(scale) +
                         "] after re-prompt");
  }
  return out;
}

PredictionTable PredictionTable::parse(std::istream& in) {
  PredictionTable table;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      table.insert(j.at("record_id").get<std::string>(), j.at("iteration").get<int>(),
                   j.at("score").get<int>());
    } catch (const json::exception& e) {
      throw ConfigError("prediction table line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError("prediction table line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return table;
}

PredictionTable PredictionTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read prediction table " + path.string());
  return parse(in);
}

void PredictionTable::insert(std::string record_id, int iteration, int score) {
  auto key = std::make_pair(std::move(record_id), iteration);
  if (scores_.contains(key)) {
    throw ConfigError("duplicate prediction for (" + key.first + ", " +
                      std::to_string(iteration) + ")");
  }
  scores_.emplace(std::move(key), score);
}

int PredictionTable::lookup(std::string_view record_id, int iteration) const {
  auto it = scores_.find(std::make_pair(std::string(record_id), iteration));
  if (it == scores_.end()) {
    throw EvaluationError("no prediction for (" + std::string(record_id) + ", " +
                          std::to_string(iteration) + ")");
  }
  return it->second;
}

TableUtilityEvaluator::TableUtilityEvaluator(PredictionTable table, const RunConfig& config)
    : table_(std::move(table)), config_(config) {}

UtilityEvaluation TableUtilityEvaluator::evaluate(std::string_view candidate, std::string_view,
                                                  std::string_view record_id, int iteration) const {
  if (text::trim(candidate).empty()) throw PreconditionError("utility evaluation of empty text");
  const int score = table_.lookup(record_id, iteration);
  if (score < 0 || score > config_.u_scale) {
    throw EvaluationError("prediction score " + std::to_string(score) + " for (" +
                          std::string(record_id) + ", " + std::to_string(iteration) +
                          ") outside [0, u_scale]");
  }
  return {score, {}, {}};
}

}  // namespace lexanon
