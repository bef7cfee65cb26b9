#pragma once

// Internal: one prompt, one optional format re-prompt in the same conversation.

#include <optional>
#include <string>
#include <vector>

#include "lexanon/error.hpp"
#include "lexanon/gateway.hpp"
#include "lexanon/prompt_registry.hpp"
#include "lexanon/trace.hpp"

namespace lexanon::detail {

struct Ask {
  Gateway& gateway;
  const PromptRegistry& registry;
  std::string profile;
  std::string model_id;
  double temperature = 0.0;
  int max_output_tokens = 1024;
  RequestTag tag = RequestTag::privacy_infer;
  std::string record_id;
  std::optional<std::uint64_t> seed;
};

inline CallRecord send(const Ask& ask, const std::vector<ChatMessage>& messages, bool followup,
                       std::string* reply) {
  ChatRequest req;
  req.model_id = ask.model_id;
  req.messages = messages;
  req.temperature = ask.temperature;
  req.max_output_tokens = ask.max_output_tokens;
  req.tag = ask.tag;
  req.record_id = ask.record_id;
  req.seed = ask.seed;
  auto resp = ask.gateway.complete(req);
  CallRecord rec;
  rec.tag = ask.tag;
  rec.prompt = messages.back().content;
  rec.reply = resp.content;
  rec.prompt_tokens = resp.prompt_tokens;
  rec.completion_tokens = resp.completion_tokens;
  rec.cached = resp.cached;
  rec.followup = followup;
  rec.latency_ms = resp.latency_ms;
  *reply = std::move(resp.content);
  return rec;
}

/// Sends `prompt`; if `parse` rejects the reply (nullopt or ParseError),
/// re-prompts once with the format reminder. Gateway errors propagate.
template <typename Parse>
auto ask_parsed(const Ask& ask, const std::string& prompt, const std::string& expected_format,
                Parse parse, std::vector<CallRecord>& calls)
    -> decltype(parse(std::string{})) {
  auto try_parse = [&](const std::string& reply) -> decltype(parse(std::string{})) {
    try {
      return parse(reply);
    } catch (const ParseError&) {
      return std::nullopt;
    }
  };
  std::vector<ChatMessage> messages{{Role::user, prompt}};
  std::string reply;
  calls.push_back(send(ask, messages, false, &reply));
  if (auto parsed = try_parse(reply)) return parsed;

  const auto& reminder_tmpl = ask.registry.get(PromptName::format_reminder, ask.profile);
  messages.push_back({Role::assistant, reply});
  messages.push_back({Role::user, render(reminder_tmpl, {{"expected_format", expected_format}})});
  calls.push_back(send(ask, messages, true, &reply));
  return try_parse(reply);
}

}  // namespace lexanon::detail
