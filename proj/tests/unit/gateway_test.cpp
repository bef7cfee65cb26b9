#include <thread>

#include <gtest/gtest.h>

#include "lexanon/error.hpp"
#include "lexanon/gateway.hpp"
#include "test_support.hpp"

namespace lexanon {
namespace {

using namespace std::chrono_literals;

ChatRequest request(std::string prompt, double temperature = 0.0,
                    RequestTag tag = RequestTag::privacy_infer, std::string record = {}) {
  ChatRequest r;
  r.model_id = "m";
  r.messages = {{Role::user, std::move(prompt)}};
  r.temperature = temperature;
  r.tag = tag;
  r.record_id = std::move(record);
  return r;
}

/// Fails with the given errors first, then answers "ok".
class FlakyBackend : public ChatBackend {
 public:
  explicit FlakyBackend(std::vector<TransportError> failures) : failures_(std::move(failures)) {}
  ChatResponse send(const ChatRequest&) override {
    ++calls;
    if (!failures_.empty()) {
      auto e = failures_.front();
      failures_.erase(failures_.begin());
      throw e;
    }
    return {"ok", 10, 2, 5, false};
  }
  int calls = 0;

 private:
  std::vector<TransportError> failures_;
};

TEST(ScriptedBackend, ServesRepliesInOrder) {
  Gateway gw(std::make_shared<ScriptedBackend>(std::vector<std::string>{"A", "B"}),
             {.cache = false});
  EXPECT_EQ(gw.complete(request("q")).content, "A");
  EXPECT_EQ(gw.complete(request("q")).content, "B");
}

TEST(ScriptedBackend, ExhaustionIsATransportError) {
  auto backend = std::make_shared<ScriptedBackend>();
  Gateway gw(backend);
  EXPECT_THROW(gw.complete(request("q")), TransportError);
}

TEST(ScriptedBackend, MostSpecificQueueWins) {
  auto b = std::make_shared<ScriptedBackend>();
  b->push("any");
  b->push("tag", RequestTag::utility_eval);
  b->push("record", std::nullopt, "r1");
  b->push("record+tag", RequestTag::utility_eval, "r1");
  Gateway gw(b, {.cache = false});
  EXPECT_EQ(gw.complete(request("q", 0, RequestTag::utility_eval, "r1")).content, "record+tag");
  EXPECT_EQ(gw.complete(request("q", 0, RequestTag::utility_eval, "r1")).content, "record");
  EXPECT_EQ(gw.complete(request("q", 0, RequestTag::utility_eval, "r1")).content, "tag");
  EXPECT_EQ(gw.complete(request("q", 0, RequestTag::utility_eval, "r1")).content, "any");
  EXPECT_EQ(b->remaining(), 0u);
  EXPECT_EQ(b->served(), 4u);
}

TEST(ScriptedBackend, LoadsJsonLinesFixtures) {
  testing::TempDir dir;
  testing::write_file(dir / "s.jsonl",
                      "{\"content\":\"x\"}\n\n{\"content\":\"y\",\"tag\":\"utility_eval\",\"record_id\":\"d\"}\n");
  auto b = ScriptedBackend::from_file(dir / "s.jsonl");
  EXPECT_EQ(b->remaining(), 2u);
  testing::write_file(dir / "bad.jsonl", "{\"content\":\"x\",\"tag\":\"bogus\"}\n");
  EXPECT_THROW(ScriptedBackend::from_file(dir / "bad.jsonl"), ConfigError);
}

TEST(Gateway, CachesTemperatureZeroRequests) {
  auto b = std::make_shared<ScriptedBackend>(std::vector<std::string>{"A", "B"});
  Gateway gw(b);
  const auto first = gw.complete(request("same"));
  const auto second = gw.complete(request("same"));
  EXPECT_FALSE(first.cached);
  EXPECT_TRUE(second.cached);
  EXPECT_EQ(second.content, first.content);
  EXPECT_EQ(second.prompt_tokens, 0);
  EXPECT_EQ(gw.backend_calls(), 1);
  EXPECT_EQ(b->remaining(), 1u);
}

TEST(Gateway, DoesNotCacheSampledRequestsOrWhenDisabled) {
  Gateway sampled(std::make_shared<ScriptedBackend>(std::vector<std::string>{"A", "B"}));
  EXPECT_EQ(sampled.complete(request("q", 0.7)).content, "A");
  EXPECT_EQ(sampled.complete(request("q", 0.7)).content, "B");

  Gateway off(std::make_shared<ScriptedBackend>(std::vector<std::string>{"A", "B"}),
              {.cache = false});
  EXPECT_EQ(off.complete(request("q")).content, "A");
  EXPECT_EQ(off.complete(request("q")).content, "B");
}

TEST(Gateway, CacheKeyCoversExactlyModelMessagesTemperatureAndBudget) {
  const auto base = request("q");
  auto other_tag = base;
  other_tag.tag = RequestTag::utility_eval;
  other_tag.record_id = "x";
  other_tag.seed = 3;
  EXPECT_EQ(cache_key(base), cache_key(other_tag));
  auto other_model = base;
  other_model.model_id = "n";
  auto other_budget = base;
  other_budget.max_output_tokens = 7;
  auto other_message = base;
  other_message.messages.push_back({Role::assistant, "a"});
  for (const auto& r : {other_model, other_budget, other_message}) {
    EXPECT_NE(cache_key(base), cache_key(r));
  }
}

TEST(Gateway, RetriesTransientFailuresWithExponentialBackoff) {
  auto backend = std::make_shared<FlakyBackend>(
      std::vector<TransportError>{TransportError("503", true), TransportError("429", true)});
  auto clock = std::make_shared<ManualClock>();
  Gateway gw(backend, {.retry_count = 3, .initial_backoff = 100ms, .backoff_factor = 2.0}, clock);
  EXPECT_EQ(gw.complete(request("q")).content, "ok");
  EXPECT_EQ(backend->calls, 3);
  EXPECT_EQ(clock->total_slept(), 300ms);
}

TEST(Gateway, GivesUpAfterTheRetryBudget) {
  auto backend = std::make_shared<FlakyBackend>(std::vector<TransportError>(
      5, TransportError("503", true)));
  auto clock = std::make_shared<ManualClock>();
  Gateway gw(backend, {.retry_count = 2, .initial_backoff = 10ms}, clock);
  EXPECT_THROW(gw.complete(request("q")), TransportError);
  EXPECT_EQ(backend->calls, 3);
}

TEST(Gateway, NonRetryableErrorsPropagateImmediately) {
  auto backend =
      std::make_shared<FlakyBackend>(std::vector<TransportError>{TransportError("401", false)});
  Gateway gw(backend, {.retry_count = 3}, std::make_shared<ManualClock>());
  EXPECT_THROW(gw.complete(request("q")), TransportError);
  EXPECT_EQ(backend->calls, 1);
}

TEST(Gateway, RefusalsAreNotRetried) {
  int calls = 0;
  auto backend = std::make_shared<CallbackBackend>([&](const ChatRequest&) -> std::string {
    ++calls;
    throw RefusalError("content_filter");
  });
  Gateway gw(backend, {}, std::make_shared<ManualClock>());
  EXPECT_THROW(gw.complete(request("q")), RefusalError);
  EXPECT_EQ(calls, 1);
}

TEST(Gateway, RejectsInvalidRequests) {
  Gateway gw(std::make_shared<ScriptedBackend>(std::vector<std::string>{"A"}));
  ChatRequest empty;
  EXPECT_THROW(gw.complete(empty), PreconditionError);
  auto leading_assistant = request("q");
  leading_assistant.messages.insert(leading_assistant.messages.begin(), {Role::assistant, "x"});
  EXPECT_THROW(gw.complete(leading_assistant), PreconditionError);
}

TEST(UsageSummary, SumsAndFilters) {
  const std::vector<std::pair<int, int>> tokens{{100, 50}, {200, 25}, {300, 25}};
  std::size_t i = 0;
  class Fixed : public ChatBackend {
   public:
    Fixed(const std::vector<std::pair<int, int>>& t, std::size_t& i) : t_(t), i_(i) {}
    ChatResponse send(const ChatRequest&) override {
      auto [p, c] = t_[i_++];
      return {"r", p, c, 10, false};
    }
    const std::vector<std::pair<int, int>>& t_;
    std::size_t& i_;
  };
  Gateway gw(std::make_shared<Fixed>(tokens, i), {.cache = false});
  EXPECT_EQ(gw.usage_summary().calls, 0);
  gw.complete(request("a", 0, RequestTag::privacy_infer));
  gw.complete(request("b", 0, RequestTag::utility_eval));
  gw.complete(request("c", 0, RequestTag::privacy_infer));
  const auto all = gw.usage_summary();
  EXPECT_EQ(all.calls, 3);
  EXPECT_EQ(all.prompt_tokens, 600);
  EXPECT_EQ(all.completion_tokens, 100);
  EXPECT_DOUBLE_EQ(all.mean_latency_ms, 10.0);
  const auto infer = gw.usage_summary(RequestTag::privacy_infer);
  EXPECT_EQ(infer.calls, 2);
  EXPECT_EQ(infer.prompt_tokens, 400);
  EXPECT_EQ(gw.usage_summary(RequestTag::optimizer_frame).calls, 0);
}

TEST(RateLimiter, NeverExceedsTheLimitPerMinute) {
  auto clock = std::make_shared<ManualClock>();
  RateLimiter limiter(3, clock);
  std::vector<Clock::time_point> issued;
  for (int i = 0; i < 10; ++i) {
    limiter.acquire();
    issued.push_back(clock->now());
    clock->advance(5s);
  }
  for (std::size_t i = 0; i < issued.size(); ++i) {
    int in_window = 0;
    for (std::size_t j = 0; j <= i; ++j) in_window += issued[i] - issued[j] < 1min ? 1 : 0;
    EXPECT_LE(in_window, 3) << "at request " << i;
  }
  // The fourth request had to wait for the first to leave the window.
  EXPECT_EQ(issued[3] - issued[0], 1min);
}

TEST(RateLimiter, ZeroMeansUnlimited) {
  auto clock = std::make_shared<ManualClock>();
  RateLimiter limiter(0, clock);
  for (int i = 0; i < 1000; ++i) limiter.acquire();
  EXPECT_EQ(clock->total_slept(), Clock::duration::zero());
}

TEST(Gateway, IsSafeForConcurrentUse) {
  std::atomic<int> n{0};
  auto backend = std::make_shared<CallbackBackend>(
      [&](const ChatRequest& r) { return "echo " + r.messages.back().content + std::to_string(n++); });
  Gateway gw(backend);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 50; ++i) gw.complete(request("p" + std::to_string((t * 50 + i) % 60)));
    });
  }
  for (auto& th : threads) th.join();
  const auto usage = gw.usage_summary();
  EXPECT_EQ(usage.calls, 200);
  EXPECT_EQ(usage.calls - usage.cached_calls, gw.backend_calls());
  EXPECT_GE(gw.backend_calls(), 60);
}

}  // namespace
}  // namespace lexanon
