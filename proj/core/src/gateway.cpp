#include "lexanon/gateway.hpp"

#include <cmath>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "lexanon/error.hpp"
#include "lexanon/text.hpp"

namespace lexanon {

using nlohmann::json;

std::string_view to_string(Role role) {
  switch (role) {
    case Role::system:
      return "system";
    case Role::user:
      return "user";
    case Role::assistant:
      return "assistant";
  }
  return "user";
}

void ChatRequest::validate() const {
  if (messages.empty()) throw PreconditionError("chat request has no messages");
  if (messages.front().role == Role::assistant) {
    throw PreconditionError("chat request must start with a system or user message");
  }
  if (temperature < 0) throw PreconditionError("temperature must be >= 0");
}

namespace {

int prompt_token_estimate(const ChatRequest& request) {
  int n = 0;
  for (const auto& m : request.messages) n += text::approx_tokens(m.content);
  return n;
}

}  // namespace

// --- ScriptedBackend -------------------------------------------------------

ScriptedBackend::ScriptedBackend(std::vector<std::string> replies) {
  for (auto& r : replies) push(std::move(r));
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read script " + path.string());
  auto backend = std::make_shared<ScriptedBackend>();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      std::optional<RequestTag> tag;
      if (j.contains("tag") && !j.at("tag").is_null()) {
        tag = prompt_name_from_string(j.at("tag").get<std::string>());
      }
      backend->push(j.at("content").get<std::string>(), tag,
                    j.value("record_id", std::string{}));
    } catch (const std::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return backend;
}

void ScriptedBackend::push(std::string content, std::optional<RequestTag> tag,
                           std::string record_id) {
  std::lock_guard lock(mu_);
  queues_[{std::move(record_id), tag ? static_cast<int>(*tag) : -1}].push_back(
      std::move(content));
}

ChatResponse ScriptedBackend::send(const ChatRequest& request) {
  std::string content;
  {
    std::lock_guard lock(mu_);
    const int tag = static_cast<int>(request.tag);
    const Key order[] = {{request.record_id, tag}, {request.record_id, -1}, {"", tag}, {"", -1}};
    std::deque<std::string>* queue = nullptr;
    for (const auto& key : order) {
      auto it = queues_.find(key);
      if (it != queues_.end() && !it->second.empty()) {
        queue = &it->second;
        break;
      }
    }
    if (!queue) {
      throw TransportError("scripted backend exhausted (tag " +
                           std::string(to_string(request.tag)) + ")");
    }
    content = std::move(queue->front());
    queue->pop_front();
    ++served_;
  }
  ChatResponse r;
  r.prompt_tokens = prompt_token_estimate(request);
  r.completion_tokens = text::approx_tokens(content);
  r.content = std::move(content);
  return r;
}

std::size_t ScriptedBackend::remaining() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& [_, q] : queues_) n += q.size();
  return n;
}

std::size_t ScriptedBackend::served() const {
  std::lock_guard lock(mu_);
  return served_;
}

ChatResponse CallbackBackend::send(const ChatRequest& request) {
  std::string content;
  {
    std::lock_guard lock(mu_);
    content = fn_(request);
  }
  ChatResponse r;
  r.prompt_tokens = prompt_token_estimate(request);
  r.completion_tokens = text::approx_tokens(content);
  r.content = std::move(content);
  return r;
}

// --- clocks and rate limiting ---------------------------------------------

namespace {

class SystemClock : public Clock {
 public:
  time_point now() override { return std::chrono::steady_clock::now(); }
  void sleep_for(duration d) override { std::this_thread::sleep_for(d); }
};

}  // namespace

std::shared_ptr<Clock> Clock::system() {
  static auto clock = std::make_shared<SystemClock>();
  return clock;
}

Clock::time_point ManualClock::now() {
  std::lock_guard lock(mu_);
  return now_;
}

void ManualClock::sleep_for(duration d) {
  std::lock_guard lock(mu_);
  if (d > duration::zero()) {
    now_ += d;
    slept_ += d;
  }
}

Clock::duration ManualClock::total_slept() const {
  std::lock_guard lock(mu_);
  return slept_;
}

RateLimiter::RateLimiter(int requests_per_minute, std::shared_ptr<Clock> clock)
    : limit_(requests_per_minute), clock_(std::move(clock)) {}

void RateLimiter::acquire() {
  if (limit_ <= 0) return;
  constexpr auto kWindow = std::chrono::minutes(1);
  std::lock_guard lock(mu_);
  for (;;) {
    const auto now = clock_->now();
    while (!issued_.empty() && now - issued_.front() >= kWindow) issued_.pop_front();
    if (static_cast<int>(issued_.size()) < limit_) {
      issued_.push_back(now);
      return;
    }
    clock_->sleep_for(issued_.front() + kWindow - now);
  }
}

// --- Gateway ----------------------------------------------------------------

std::string cache_key(const ChatRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  return json{{"model", request.model_id},
              {"messages", messages},
              {"temperature", request.temperature},
              {"max_tokens", request.max_output_tokens}}
      .dump();
}

Gateway::Gateway(std::shared_ptr<ChatBackend> backend, GatewayOptions options,
                 std::shared_ptr<Clock> clock)
    : backend_(std::move(backend)),
      options_(options),
      clock_(std::move(clock)),
      limiter_(options.requests_per_minute, clock_) {
  if (!backend_) throw PreconditionError("gateway needs a backend");
}

ChatResponse Gateway::complete(const ChatRequest& request) {
  request.validate();
  const bool cacheable = options_.cache && request.temperature == 0.0;
  std::string key;
  if (cacheable) {
    key = cache_key(request);
    std::lock_guard lock(mu_);
    if (auto it = cache_.find(key); it != cache_.end()) {
      ChatResponse hit = it->second;
      hit.cached = true;
      hit.prompt_tokens = 0;
      hit.completion_tokens = 0;
      hit.latency_ms = 0;
      stats_.push_back({request.tag, 0, 0, 0, true});
      return hit;
    }
  }

  ChatResponse response = send_with_retry(request);
  response.cached = false;

  std::lock_guard lock(mu_);
  ++backend_calls_;
  stats_.push_back({request.tag, response.prompt_tokens, response.completion_tokens,
                    response.latency_ms, false});
  if (cacheable) cache_.emplace(std::move(key), response);
  return response;
}

ChatResponse Gateway::send_with_retry(const ChatRequest& request) {
  auto backoff = std::chrono::duration<double, std::milli>(options_.initial_backoff);
  for (int attempt = 0;; ++attempt) {
    limiter_.acquire();
    const auto start = clock_->now();
    try {
      ChatResponse r = backend_->send(request);
      if (r.latency_ms == 0) {
        r.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(clock_->now() - start)
                           .count();
      }
      if (r.prompt_tokens < 0 || r.completion_tokens < 0) {
        throw ProtocolError("negative token counts in provider response");
      }
      return r;
    } catch (const TransportError& e) {
      if (!e.retryable()) throw;
      if (attempt >= options_.retry_count) {
        throw TransportError("giving up after " + std::to_string(attempt + 1) +
                             " attempts: " + e.what());
      }
      spdlog::warn("transient failure ({}), retry {}/{} in {:.0f} ms", e.what(), attempt + 1,
                   options_.retry_count, backoff.count());
      clock_->sleep_for(std::chrono::duration_cast<Clock::duration>(backoff));
      backoff *= options_.backoff_factor;
    }
  }
}

UsageSummary Gateway::usage_summary(std::optional<RequestTag> tag_filter) const {
  std::lock_guard lock(mu_);
  UsageSummary s;
  std::int64_t latency_total = 0;
  std::int64_t latency_count = 0;
  for (const auto& c : stats_) {
    if (tag_filter && c.tag != *tag_filter) continue;
    ++s.calls;
    s.prompt_tokens += c.prompt_tokens;
    s.completion_tokens += c.completion_tokens;
    if (c.cached) {
      ++s.cached_calls;
    } else {
      latency_total += c.latency_ms;
      ++latency_count;
    }
  }
  if (latency_count > 0) s.mean_latency_ms = static_cast<double>(latency_total) / latency_count;
  return s;
}

std::int64_t Gateway::backend_calls() const {
  std::lock_guard lock(mu_);
  return backend_calls_;
}

}  // namespace lexanon
