#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "lexanon/gateway.hpp"

namespace lexanon {

struct HttpBackendOptions {
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string api_key;
  int timeout_seconds = 120;
};

/// OpenAI-compatible `POST {base_url}/chat/completions` client.
///
/// 429, 5xx and connection failures are retryable TransportErrors; a
/// content-filter finish reason or error code is a RefusalError; anything
/// that does not look like a chat completion is a ProtocolError.
class HttpBackend : public ChatBackend {
 public:
  explicit HttpBackend(HttpBackendOptions options);
  ChatResponse send(const ChatRequest& request) override;

 private:
  HttpBackendOptions options_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

nlohmann::json to_wire(const ChatRequest& request);
/// Throws RefusalError or ProtocolError.
ChatResponse from_wire(const nlohmann::json& body);

}  // namespace lexanon
