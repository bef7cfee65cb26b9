#include "lexanon/http_backend.hpp"

#include <chrono>

#include <httplib.h>

#include "lexanon/error.hpp"
#include "lexanon/text.hpp"

namespace lexanon {

using nlohmann::json;

json to_wire(const ChatRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  json body{{"model", request.model_id},
            {"messages", messages},
            {"temperature", request.temperature},
            {"max_tokens", request.max_output_tokens}};
  if (request.seed) body["seed"] = *request.seed;
  return body;
}

ChatResponse from_wire(const json& body) {
  if (!body.is_object()) throw ProtocolError("chat completion body is not an object");
  if (body.contains("error") && body.at("error").is_object()) {
    const auto& err = body.at("error");
    const auto code = err.value("code", json(nullptr));
    const auto message = err.value("message", std::string("unknown error"));
    if (code.is_string() && code.get<std::string>() == "content_filter") throw RefusalError(message);
    throw ProtocolError("provider error: " + message);
  }
  if (!body.contains("choices") || !body.at("choices").is_array() || body.at("choices").empty()) {
    throw ProtocolError("chat completion without choices");
  }
  const auto& choice = body.at("choices").front();
  if (choice.value("finish_reason", std::string{}) == "content_filter") {
    throw RefusalError("response withheld by content filter");
  }
  if (!choice.contains("message") || !choice.at("message").is_object()) {
    throw ProtocolError("chat completion choice without message");
  }
  const auto& message = choice.at("message");
  if (message.contains("refusal") && message.at("refusal").is_string()) {
    throw RefusalError(message.at("refusal").get<std::string>());
  }
  if (!message.contains("content") || !message.at("content").is_string()) {
    throw ProtocolError("chat completion message without string content");
  }
  ChatResponse r;
  r.content = message.at("content").get<std::string>();
  if (body.contains("usage") && body.at("usage").is_object()) {
    const auto& usage = body.at("usage");
    r.prompt_tokens = usage.value("prompt_tokens", 0);
    r.completion_tokens = usage.value("completion_tokens", 0);
  } else {
    r.completion_tokens = text::approx_tokens(r.content);
  }
  return r;
}

HttpBackend::HttpBackend(HttpBackendOptions options) : options_(std::move(options)) {
  const auto& url = options_.base_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint must look like http(s)://host[:port][/path], got '" + url + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

ChatResponse HttpBackend::send(const ChatRequest& request) {
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(std::chrono::seconds(std::min(options_.timeout_seconds, 30)));
  client.set_read_timeout(std::chrono::seconds(options_.timeout_seconds));
  client.set_write_timeout(std::chrono::seconds(options_.timeout_seconds));
  httplib::Headers headers;
  if (!options_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + options_.api_key);
    headers.emplace("api-key", options_.api_key);
  }

  const auto start = std::chrono::steady_clock::now();
  auto res = client.Post(path_prefix_ + "/chat/completions", headers, to_wire(request).dump(),
                         "application/json");
  const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - start)
                           .count();
  if (!res) {
    throw TransportError("HTTP request failed: " + httplib::to_string(res.error()), true);
  }
  if (res->status == 429 || res->status >= 500) {
    throw TransportError("HTTP " + std::to_string(res->status), true);
  }

  json body;
  try {
    body = json::parse(res->body);
  } catch (const json::parse_error&) {
    if (res->status != 200) {
      throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    }
    throw ProtocolError("chat completion body is not JSON");
  }
  if (res->status != 200) {
    if (body.contains("error") && body.at("error").is_object()) {
      const auto& err = body.at("error");
      const auto code = err.value("code", json(nullptr));
      if (code.is_string() && code.get<std::string>() == "content_filter") {
        throw RefusalError(err.value("message", std::string("content filter")));
      }
      throw TransportError("HTTP " + std::to_string(res->status) + ": " +
                           err.value("message", std::string{}));
    }
    throw TransportError("HTTP " + std::to_string(res->status));
  }
  ChatResponse r = from_wire(body);
  r.latency_ms = latency;
  return r;
}

}  // namespace lexanon
