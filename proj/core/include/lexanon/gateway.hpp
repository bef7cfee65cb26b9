#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "lexanon/core.hpp"

namespace lexanon {

using RequestTag = PromptName;

enum class Role { system, user, assistant };
std::string_view to_string(Role role);

struct ChatMessage {
  Role role = Role::user;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatRequest {
  std::string model_id;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_output_tokens = 1024;
  RequestTag tag = RequestTag::privacy_infer;
  // Routing/accounting metadata; neither is part of the cache key.
  std::string record_id;
  std::optional<std::uint64_t> seed;

  /// Throws PreconditionError on an empty message list or a leading
  /// assistant message.
  void validate() const;
};

struct ChatResponse {
  std::string content;
  int prompt_tokens = 0;
  int completion_tokens = 0;
  std::int64_t latency_ms = 0;
  bool cached = false;
};

/// A transport to some chat model. Implementations throw TransportError
/// (retryable for transient faults), RefusalError or ProtocolError.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse send(const ChatRequest& request) = 0;
};

/// Replays canned replies in FIFO order.
///
/// Replies may be keyed by record id and/or request tag. A request draws from
/// the most specific non-empty queue: (record, tag), (record, any),
/// (any, tag), then (any, any). Running dry throws a non-retryable
/// TransportError.
class ScriptedBackend : public ChatBackend {
 public:
  ScriptedBackend() = default;
  explicit ScriptedBackend(std::vector<std::string> replies);

  /// JSON-lines of {"content": ..., "tag"?: ..., "record_id"?: ...}.
  static std::shared_ptr<ScriptedBackend> from_file(const std::filesystem::path& path);

  void push(std::string content, std::optional<RequestTag> tag = std::nullopt,
            std::string record_id = {});

  ChatResponse send(const ChatRequest& request) override;

  std::size_t remaining() const;
  std::size_t served() const;

 private:
  using Key = std::pair<std::string, int>;  // (record_id or "", tag or -1)
  mutable std::mutex mu_;
  std::map<Key, std::deque<std::string>> queues_;
  std::size_t served_ = 0;
};

/// Computes replies with a callable. Handy for adversaries whose reply
/// depends on the prompt.
class CallbackBackend : public ChatBackend {
 public:
  using Fn = std::function<std::string(const ChatRequest&)>;
  explicit CallbackBackend(Fn fn) : fn_(std::move(fn)) {}
  ChatResponse send(const ChatRequest& request) override;

 private:
  std::mutex mu_;
  Fn fn_;
};

/// Time source with an injectable sleep so rate limiting and backoff can be
/// tested without waiting.
class Clock {
 public:
  using time_point = std::chrono::steady_clock::time_point;
  using duration = std::chrono::steady_clock::duration;

  virtual ~Clock() = default;
  virtual time_point now() = 0;
  virtual void sleep_for(duration d) = 0;

  static std::shared_ptr<Clock> system();
};

/// Simulated clock: sleeping advances time instantly.
class ManualClock : public Clock {
 public:
  time_point now() override;
  void sleep_for(duration d) override;
  void advance(duration d) { sleep_for(d); }
  duration total_slept() const;

 private:
  mutable std::mutex mu_;
  time_point now_{};
  duration slept_{};
};

/// Sliding one-minute window limiter.
class RateLimiter {
 public:
  RateLimiter(int requests_per_minute, std::shared_ptr<Clock> clock);
  /// Blocks (via the clock) until a request may be issued, then records it.
  void acquire();

 private:
  int limit_;
  std::shared_ptr<Clock> clock_;
  std::mutex mu_;
  std::deque<Clock::time_point> issued_;
};

struct GatewayOptions {
  int retry_count = 3;
  std::chrono::milliseconds initial_backoff{500};
  double backoff_factor = 2.0;
  bool cache = true;
  int requests_per_minute = 0;
};

struct UsageSummary {
  std::int64_t calls = 0;
  std::int64_t cached_calls = 0;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  double mean_latency_ms = 0.0;
};

/// Uniform completion entry point shared by every component of a run.
///
/// Safe for concurrent use. Retries retryable transport errors with
/// exponential backoff, throttles through the rate limiter, and caches
/// temperature-0 requests. Cached replies report zero tokens and latency
/// since nothing new was spent.
class Gateway {
 public:
  Gateway(std::shared_ptr<ChatBackend> backend, GatewayOptions options = {},
          std::shared_ptr<Clock> clock = Clock::system());

  ChatResponse complete(const ChatRequest& request);

  UsageSummary usage_summary(std::optional<RequestTag> tag_filter = std::nullopt) const;

  /// Requests forwarded to the backend (cache hits excluded).
  std::int64_t backend_calls() const;

 private:
  struct CallStat {
    RequestTag tag;
    int prompt_tokens;
    int completion_tokens;
    std::int64_t latency_ms;
    bool cached;
  };

  ChatResponse send_with_retry(const ChatRequest& request);

  std::shared_ptr<ChatBackend> backend_;
  GatewayOptions options_;
  std::shared_ptr<Clock> clock_;
  RateLimiter limiter_;

  mutable std::mutex mu_;
  std::map<std::string, ChatResponse> cache_;
  std::vector<CallStat> stats_;
  std::int64_t backend_calls_ = 0;
};

/// Canonical cache key: model, messages, temperature and output budget.
std::string cache_key(const ChatRequest& request);

}  // namespace lexanon
