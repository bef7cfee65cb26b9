#include <deque>

#include <gtest/gtest.h>

#include "lexanon/error.hpp"
#include "lexanon/optimizer.hpp"
#include "test_support.hpp"

namespace lexanon {
namespace {

using testing::marked;

// Optimizer replies served in order; each is wrapped in rewrite delimiters.
std::function<std::string(const ChatRequest&)> rewrites(std::vector<std::string> texts,
                                                        std::vector<std::string>* prompts = nullptr) {
  auto queue = std::make_shared<std::deque<std::string>>(texts.begin(), texts.end());
  return [queue, prompts](const ChatRequest& request) -> std::string {
    if (prompts) prompts->push_back(testing::last_user(request));
    if (queue->empty()) throw EvaluationError("test optimizer exhausted");
    auto next = queue->front();
    queue->pop_front();
    return next;
  };
}

std::string wrap(const std::string& text) { return "Here you go.\n<rewrite>" + text + "</rewrite>"; }

Record record_with(std::string text) {
  return {"doc", std::move(text), "Marta Ilves", "composer", std::nullopt};
}

struct World {
  World(int k, int t, int u_max, std::function<std::string(const ChatRequest&)> optimizer)
      : config(testing::test_config(k, t, u_max)),
        gateway(testing::marker_world("Marta Ilves", k, std::move(optimizer))),
        utility(gateway, testing::bundled_registry(), config),
        optimizer(gateway, testing::bundled_registry(), config, utility) {}

  int optimizer_calls() const { return gateway.usage_summary(RequestTag::optimizer_frame).calls; }

  RunConfig config;
  Gateway gateway;
  JudgeUtilityEvaluator utility;
  Optimizer optimizer;
};

std::vector<std::optional<OptimizerMode>> modes(const OptimizationTrace& trace) {
  std::vector<std::optional<OptimizerMode>> out;
  for (const auto& e : trace.entries) out.push_back(e.mode);
  return out;
}

TEST(ChooseMode, PrivacyUntilTheAdversaryMisses) {
  auto config = testing::test_config(10, 5, 90);
  const auto b = config.bounds();
  EXPECT_EQ(choose_mode(ObjectiveVector(1, 100, b), config), OptimizerMode::privacy);
  EXPECT_EQ(choose_mode(ObjectiveVector(10, 0, b), config), OptimizerMode::privacy);
  EXPECT_EQ(choose_mode(ObjectiveVector(11, 0, b), config), OptimizerMode::utility);
  EXPECT_EQ(choose_mode(ObjectiveVector(11, 95, b), config), OptimizerMode::utility);
  config.privacy_only = true;
  EXPECT_EQ(choose_mode(ObjectiveVector(11, 0, b), config), OptimizerMode::privacy);
}

TEST(ExtractRewrite, LastCompletePair) {
  EXPECT_EQ(extract_rewrite("<rewrite> a </rewrite>"), "a");
  EXPECT_EQ(extract_rewrite("<rewrite>draft</rewrite> then <rewrite>final\ntext</rewrite> ok"),
            "final\ntext");
  EXPECT_EQ(extract_rewrite("<rewrite>one</rewrite> <rewrite>unclosed"), "one");
  EXPECT_FALSE(extract_rewrite("no delimiters"));
  EXPECT_FALSE(extract_rewrite("<rewrite>   </rewrite>"));
  EXPECT_FALSE(extract_rewrite("</rewrite><rewrite>"));
}

TEST(Optimizer, StepPromptCarriesModeInstructionAndFeedback) {
  World w(3, 3, 80, rewrites({}));
  const auto b = w.config.bounds();
  Memory memory;
  memory.append({0, "Original bio.", ObjectiveVector(2, 70, b), std::nullopt});
  PrivacyFeedback feedback{"- SECRET CLUE", {"X", "Marta Ilves", "Y"}, 2};

  const auto& registry = testing::bundled_registry();
  const auto meta_p = render(registry.get(PromptName::meta_privacy, "biography"), {});
  const auto meta_u = render(registry.get(PromptName::meta_utility, "biography"), {});

  const auto privacy = w.optimizer.render_step_prompt(memory, feedback, OptimizerMode::privacy);
  EXPECT_NE(privacy.find(meta_p), std::string::npos);
  EXPECT_EQ(privacy.find(meta_u), std::string::npos);
  EXPECT_NE(privacy.find("- SECRET CLUE"), std::string::npos);
  EXPECT_NE(privacy.find("Original bio."), std::string::npos);

  const auto utility = w.optimizer.render_step_prompt(memory, feedback, OptimizerMode::utility);
  EXPECT_NE(utility.find(meta_u), std::string::npos);
  EXPECT_EQ(utility.find(meta_p), std::string::npos);
  EXPECT_EQ(utility.find("SECRET CLUE"), std::string::npos);
}

TEST(Optimizer, StepRepromptsOnceThenFails) {
  World w(3, 3, 80, rewrites({"no block", wrap("second try")}));
  Memory memory;
  memory.append({0, "x", ObjectiveVector(1, 0, w.config.bounds()), std::nullopt});
  const auto r = w.optimizer.step(memory, {}, OptimizerMode::privacy);
  EXPECT_EQ(r.text, "second try");
  ASSERT_EQ(r.calls.size(), 2u);
  EXPECT_TRUE(r.calls[1].followup);

  World w2(3, 3, 80, rewrites({"no block", "still none"}));
  EXPECT_THROW(w2.optimizer.step(memory, {}, OptimizerMode::privacy), StepError);
  EXPECT_THROW(w2.optimizer.step(Memory{}, {}, OptimizerMode::privacy), PreconditionError);
}

TEST(Optimizer, StopsWhenObjectivesAreMet) {
  World w(3, 5, 80, rewrites({wrap(marked("v1", 4, 60)), wrap(marked("v2", 4, 85))}));
  const auto out = w.optimizer.run_record(record_with(marked("orig", 2, 70)));
  const auto& t = out.trace;
  EXPECT_TRUE(t.sealed);
  EXPECT_EQ(t.stop_reason, StopReason::objectives_met);
  ASSERT_EQ(t.entries.size(), 3u);
  EXPECT_EQ(modes(t), (std::vector<std::optional<OptimizerMode>>{
                          std::nullopt, OptimizerMode::privacy, OptimizerMode::utility}));
  EXPECT_EQ(t.final_iteration, 2);
  EXPECT_EQ(out.final_entry.objectives, ObjectiveVector(4, 85, w.config.bounds()));
  EXPECT_EQ(t.entries[0].clues, "- the marked details still point at the subject");
  EXPECT_EQ(t.entries[0].matched_rank, 2);
  EXPECT_TRUE(t.entries[1].clues.empty());
  EXPECT_EQ(w.optimizer_calls(), 2);
}

TEST(Optimizer, StopsAtTheIterationCap) {
  World w(3, 2, 80, rewrites({wrap(marked("v1", 2, 50)), wrap(marked("v2", 3, 40))}));
  const auto out = w.optimizer.run_record(record_with(marked("orig", 1, 90)));
  EXPECT_EQ(out.trace.stop_reason, StopReason::iteration_cap);
  ASSERT_EQ(out.trace.entries.size(), 3u);
  EXPECT_EQ(out.trace.final_iteration, 2);
  EXPECT_EQ(w.optimizer_calls(), 2);
}

TEST(Optimizer, FastPathSkipsTheOptimizer) {
  World w(3, 5, 80, rewrites({}));
  const auto out = w.optimizer.run_record(record_with(marked("orig", 4, 90)));
  EXPECT_EQ(out.trace.stop_reason, StopReason::objectives_met);
  EXPECT_EQ(out.trace.entries.size(), 1u);
  EXPECT_EQ(out.trace.final_iteration, 0);
  EXPECT_EQ(w.optimizer_calls(), 0);
}

TEST(Optimizer, PrivacyRegressionSwitchesBackToPrivacyMode) {
  std::vector<std::string> prompts;
  World w(3, 3, 80,
          rewrites({wrap(marked("v1", 2, 70)), wrap(marked("v2", 4, 60)),
                    wrap(marked("v3", 4, 65))},
                   &prompts));
  const auto out = w.optimizer.run_record(record_with(marked("orig", 4, 50)));
  const auto& t = out.trace;
  ASSERT_EQ(t.entries.size(), 4u);
  EXPECT_EQ(t.stop_reason, StopReason::iteration_cap);
  EXPECT_EQ(modes(t), (std::vector<std::optional<OptimizerMode>>{
                          std::nullopt, OptimizerMode::utility, OptimizerMode::privacy,
                          OptimizerMode::utility}));
  // The regressed rewrite is never selected; privacy outranks its utility.
  EXPECT_EQ(t.final_iteration, 3);
  ASSERT_EQ(prompts.size(), 3u);
  EXPECT_NE(prompts[1].find("- the marked details"), std::string::npos);
  EXPECT_EQ(prompts[0].find("- the marked details"), std::string::npos);
}

TEST(Optimizer, SelectionPrefersPrivacyOverLaterUtility) {
  World w(3, 2, 95, rewrites({wrap(marked("v1", 4, 40)), wrap(marked("v2", 3, 90))}));
  const auto out = w.optimizer.run_record(record_with(marked("orig", 1, 99)));
  EXPECT_EQ(out.trace.final_iteration, 1);
}

TEST(Optimizer, MissingRewriteSealsWithEvaluationError) {
  World w(3, 5, 80, rewrites({wrap(marked("v1", 2, 50)), "nothing", "nothing again"}));
  const auto out = w.optimizer.run_record(record_with(marked("orig", 1, 60)));
  EXPECT_TRUE(out.trace.sealed);
  EXPECT_EQ(out.trace.stop_reason, StopReason::evaluation_error);
  ASSERT_TRUE(out.trace.error);
  EXPECT_EQ(out.trace.entries.size(), 2u);
  EXPECT_EQ(out.trace.final_iteration, 1);
}

TEST(Optimizer, BackendFailureOnTheOriginalStillSealsATrace) {
  World w(3, 5, 80, rewrites({}));
  const auto out = w.optimizer.run_record(record_with("no marker here"));
  EXPECT_EQ(out.trace.stop_reason, StopReason::evaluation_error);
  ASSERT_EQ(out.trace.entries.size(), 1u);
  EXPECT_EQ(out.trace.entries[0].p, 1);
  EXPECT_EQ(out.trace.final_iteration, 0);
}

TEST(Optimizer, InvalidRecordThrows) {
  World w(3, 5, 80, rewrites({}));
  EXPECT_THROW(w.optimizer.run_record({"", "text", "x", "y", std::nullopt}), CorpusError);
}

TEST(Optimizer, PrivacyOnlyNeverUsesUtilityMode) {
  auto world = std::make_unique<World>(
      3, 3, 80,
      rewrites({wrap(marked("v1", 4, 10)), wrap(marked("v2", 4, 20)), wrap(marked("v3", 4, 30))}));
  world->config.privacy_only = true;
  Optimizer privacy_only(world->gateway, testing::bundled_registry(), world->config, world->utility);
  const auto out = privacy_only.run_record(record_with(marked("orig", 1, 50)));
  for (std::size_t i = 1; i < out.trace.entries.size(); ++i) {
    EXPECT_EQ(out.trace.entries[i].mode, OptimizerMode::privacy);
  }
}

}  // namespace
}  // namespace lexanon
