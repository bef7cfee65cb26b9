#include "lexanon/optimizer.hpp"

#include <chrono>

#include <spdlog/spdlog.h>

#include "conversation.hpp"
#include "lexanon/text.hpp"

namespace lexanon {

OptimizerMode choose_mode(const ObjectiveVector& current, const RunConfig& config) {
  if (config.privacy_only) return OptimizerMode::privacy;
  return current.privacy() < config.bounds().privacy_max() ? OptimizerMode::privacy
                                                           : OptimizerMode::utility;
}

std::optional<std::string> extract_rewrite(std::string_view reply) {
  const auto close = reply.rfind(kRewriteClose);
  if (close == std::string_view::npos) return std::nullopt;
  const auto open = reply.rfind(kRewriteOpen, close);
  if (open == std::string_view::npos) return std::nullopt;
  const auto body_start = open + kRewriteOpen.size();
  auto body = text::trim(reply.substr(body_start, close - body_start));
  if (body.empty()) return std::nullopt;
  return body;
}

Optimizer::Optimizer(Gateway& gateway, const PromptRegistry& registry, const RunConfig& config,
                     const UtilityEvaluator& utility)
    : gateway_(gateway),
      registry_(registry),
      config_(config),
      privacy_(gateway, registry, config),
      utility_(utility) {}

std::string Optimizer::render_step_prompt(const Memory& memory, const PrivacyFeedback& feedback,
                                          OptimizerMode mode) const {
  const auto& profile = config_.dataset_profile;
  const auto meta_name =
      mode == OptimizerMode::privacy ? PromptName::meta_privacy : PromptName::meta_utility;
  const auto meta = render(registry_.get(meta_name, profile), {});
  return render(registry_.get(PromptName::optimizer_frame, profile),
                {{"memory", serialize_memory(memory.entries(), config_.effective_memory_window(),
                                             config_.bounds())},
                 {"meta", meta},
                 {"feedback", mode == OptimizerMode::privacy ? feedback.clues : std::string{}}});
}

StepResult Optimizer::step(const Memory& memory, const PrivacyFeedback& feedback,
                           OptimizerMode mode, std::string_view record_id) const {
  if (memory.empty()) throw PreconditionError("optimizer step needs at least the original text");
  StepResult out;
  detail::Ask ask{gateway_,
                  registry_,
                  config_.dataset_profile,
                  config_.backend.model_id,
                  config_.backend.optimizer_temperature,
                  config_.backend.max_output_tokens,
                  RequestTag::optimizer_frame,
                  std::string(record_id),
                  config_.backend.seed};
  auto rewrite = detail::ask_parsed(
      ask, render_step_prompt(memory, feedback, mode),
      "the complete rewritten text enclosed in " + std::string(kRewriteOpen) + " and " +
          std::string(kRewriteClose),
      [](const std::string& reply) { return extract_rewrite(reply); }, out.calls);
  if (!rewrite) {
    throw StepError("optimizer reply held no " + std::string(kRewriteOpen) + " block");
  }
  out.text = std::move(*rewrite);
  return out;
}

namespace {

struct Evaluated {
  TraceEntry trace_entry;
  MemoryEntry memory_entry;
};

}  // namespace

RecordOutcome Optimizer::run_record(const Record& record) const {
  record.validate();
  const auto started = std::chrono::steady_clock::now();
  const auto bounds = config_.bounds();
  const auto kind = record.kind();

  OptimizationTrace trace;
  trace.record_id = record.id;
  trace.config = to_json(config_);
  Memory memory;

  auto evaluate = [&](std::string candidate, int iteration, std::optional<OptimizerMode> mode,
                      std::vector<CallRecord> step_calls) {
    TraceEntry te;
    te.iteration = iteration;
    te.mode = mode;
    te.text = candidate;
    te.calls = std::move(step_calls);

    auto privacy = privacy_.evaluate(candidate, record.identity, kind, record.id);
    te.calls.insert(te.calls.end(), privacy.calls.begin(), privacy.calls.end());
    te.errors.insert(te.errors.end(), privacy.errors.begin(), privacy.errors.end());
    auto utility = utility_.evaluate(candidate, record.task_label, record.id, iteration);
    te.calls.insert(te.calls.end(), utility.calls.begin(), utility.calls.end());
    te.errors.insert(te.errors.end(), utility.errors.begin(), utility.errors.end());

    te.p = privacy.p;
    te.u = utility.u;
    te.guesses = privacy.feedback.guesses;
    te.clues = privacy.feedback.clues;
    te.matched_rank = privacy.feedback.matched_rank;

    MemoryEntry me{iteration, std::move(candidate), ObjectiveVector(privacy.p, utility.u, bounds),
                   std::move(privacy.feedback)};
    memory.append(std::move(me));
    trace.entries.push_back(std::move(te));
  };

  try {
    evaluate(record.original_text, 0, std::nullopt, {});
    for (;;) {
      const auto& current = memory.back();
      if (current.objectives.privacy() == bounds.privacy_max() &&
          current.objectives.utility() >= config_.u_max) {
        trace.stop_reason = StopReason::objectives_met;
        break;
      }
      if (static_cast<int>(memory.size()) >= config_.max_iterations + 1) {
        trace.stop_reason = StopReason::iteration_cap;
        break;
      }
      const auto mode = choose_mode(current.objectives, config_);
      auto step_result =
          step(memory, current.feedback.value_or(PrivacyFeedback{}), mode, record.id);
      evaluate(std::move(step_result.text), static_cast<int>(memory.size()), mode,
               std::move(step_result.calls));
    }
  } catch (const Error& e) {
    spdlog::warn("record '{}': {}", record.id, e.what());
    trace.stop_reason = StopReason::evaluation_error;
    trace.error = e.what();
  }

  if (memory.empty()) {
    // The original text could not even be scored; keep it with the most
    // conservative objectives so the trace still has an entry to select.
    TraceEntry te;
    te.text = record.original_text;
    te.p = 1;
    te.u = 0;
    te.errors.push_back(trace.error.value_or("evaluation failed"));
    memory.append({0, record.original_text, ObjectiveVector(1, 0, bounds), std::nullopt});
    trace.entries.push_back(std::move(te));
  }

  const auto& best = select_lex_max(memory);
  trace.final_iteration = best.iteration;
  trace.sealed = true;
  trace.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - started)
                           .count();
  return {std::move(trace), best};
}

}  // namespace lexanon
