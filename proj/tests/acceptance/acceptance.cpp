// Acceptance checks: one PASS/FAIL/SKIP line per criterion. Exit status is
// nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "lexanon/attack.hpp"
#include "lexanon/config.hpp"
#include "lexanon/core.hpp"
#include "lexanon/distill_export.hpp"
#include "lexanon/error.hpp"
#include "lexanon/metrics.hpp"
#include "lexanon/optimizer.hpp"
#include "lexanon/pipeline.hpp"
#include "lexanon/privacy_evaluator.hpp"
#include "lexanon/significance.hpp"
#include "lexanon/trace.hpp"
#include "lexanon/utility_evaluator.hpp"
#include "test_support.hpp"

namespace {

namespace fs = std::filesystem;
using namespace lexanon;
using nlohmann::json;
using testing::marked;

struct Outcome {
  enum Status { pass, fail, skip } status = pass;
  std::string detail;
};

// Collects the first few mismatches of a criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (failures_ <= 3) {
      if (!notes_.empty()) notes_ += "; ";
      notes_ += what;
    }
  }
  Outcome done(std::string summary) const {
    if (failures_ == 0) return {Outcome::pass, std::move(summary)};
    return {Outcome::fail, std::to_string(failures_) + " mismatch(es): " + notes_};
  }

 private:
  int failures_ = 0;
  std::string notes_;
};

// --- rank-based privacy score -------------------------------------------------

Outcome rank_score() {
  std::ifstream in(testing::fixture_dir() / "privacy_rank_cases.json");
  const auto table = json::parse(in);
  const int k = table.at("k").get<int>();
  auto config = testing::test_config(k, 5, 90);
  Check check;
  int cases = 0;
  for (const auto& c : table.at("cases")) {
    auto backend = std::make_shared<ScriptedBackend>();
    backend->push(c.at("reply").get<std::string>(), RequestTag::privacy_infer);
    backend->push("- clue", RequestTag::privacy_feedback);
    Gateway gw(backend);
    PrivacyEvaluator evaluator(gw, testing::bundled_registry(), config);
    const auto r = evaluator.evaluate(
        "candidate text", c.at("identity").get<std::string>(),
        attribute_kind_from_string(c.at("attribute_kind").get<std::string>()));
    const int expected = c.at("expected_p").get<int>();
    check.expect(r.p == expected, c.at("name").get<std::string>() + ": got " +
                                      std::to_string(r.p) + ", want " + std::to_string(expected));
    check.expect(r.feedback.clues.empty() == (expected == k + 1),
                 c.at("name").get<std::string>() + ": clue presence");
    ++cases;
  }
  return check.done(std::to_string(cases) + " cases exact");
}

// --- lexicographic order --------------------------------------------------------

Outcome lex_order() {
  const ObjectiveBounds bounds{10, 100};
  std::mt19937_64 rng(20240611);
  std::uniform_int_distribution<int> p_dist(1, 11);
  std::uniform_int_distribution<int> u_dist(0, 100);
  std::uniform_int_distribution<int> u_narrow(40, 44);
  Check check;
  for (int i = 0; i < 10000; ++i) {
    // Narrow utilities in half the draws so equal-privacy ties are common.
    const bool narrow = i % 2 == 0;
    const int pa = p_dist(rng), pb = p_dist(rng);
    const int ua = narrow ? u_narrow(rng) : u_dist(rng);
    const int ub = narrow ? u_narrow(rng) : u_dist(rng);
    const ObjectiveVector a(pa, ua, bounds), b(pb, ub, bounds);
    const auto ta = std::pair(pa, ua), tb = std::pair(pb, ub);
    const auto expected = ta > tb ? LexOrder::a_preferred
                                  : (ta < tb ? LexOrder::b_preferred : LexOrder::equal);
    check.expect(lex_compare(a, b) == expected, "pair " + std::to_string(i));
  }
  for (int m = 0; m < 1000; ++m) {
    const int n = 1 + static_cast<int>(rng() % 12);
    std::vector<MemoryEntry> entries;
    for (int t = 0; t < n; ++t) {
      entries.push_back(
          {t, "t" + std::to_string(t), ObjectiveVector(1 + static_cast<int>(rng() % 4),
                                                       static_cast<int>(rng() % 3), bounds),
           std::nullopt});
    }
    // Tournament: the undominated entries, then the highest iteration among them.
    int winner = -1;
    for (int i = 0; i < n; ++i) {
      bool dominated = false;
      for (int j = 0; j < n; ++j) {
        if (lex_prefers(entries[j].objectives, entries[i].objectives)) dominated = true;
      }
      if (!dominated) winner = i;
    }
    check.expect(select_lex_max(entries).iteration == winner, "memory " + std::to_string(m));
  }
  return check.done("10000 pairs, 1000 memories");
}

// --- marker world helpers -------------------------------------------------------

struct World {
  World(RunConfig cfg, std::function<std::string(const ChatRequest&)> optimizer)
      : config(std::move(cfg)),
        gateway(testing::marker_world("Subject Person", config.k_guesses, std::move(optimizer))),
        utility(gateway, testing::bundled_registry(), config),
        optimizer(gateway, testing::bundled_registry(), config, utility) {}

  RecordOutcome run(int p0, int u0) {
    return optimizer.run_record({"rec", marked("original", p0, u0), "Subject Person", "composer",
                                 std::nullopt});
  }
  int optimizer_calls() const { return gateway.usage_summary(RequestTag::optimizer_frame).calls; }

  RunConfig config;
  Gateway gateway;
  JudgeUtilityEvaluator utility;
  Optimizer optimizer;
};

std::string wrap(const std::string& text) { return "<rewrite>" + text + "</rewrite>"; }

// --- mode machine ---------------------------------------------------------------

Outcome mode_machine() {
  std::mt19937_64 rng(7);
  Check check;
  int steps = 0;
  for (int run = 0; run < 200; ++run) {
    const int k = 1 + static_cast<int>(rng() % 10);
    const int t_max = 1 + static_cast<int>(rng() % 6);
    const int u_max = 50 + static_cast<int>(rng() % 51);
    auto config = testing::test_config(k, t_max, u_max);
    config.privacy_only = rng() % 5 == 0;
    auto draws = std::make_shared<std::mt19937_64>(rng());
    World w(config, [draws, k](const ChatRequest&) {
      const int p = 1 + static_cast<int>((*draws)() % (k + 1));
      const int u = static_cast<int>((*draws)() % 101);
      return wrap(marked("rewrite", p, u));
    });
    const int p0 = 1 + static_cast<int>(rng() % (k + 1));
    const int u0 = static_cast<int>(rng() % 101);
    const auto out = w.run(p0, u0);
    const auto& t = out.trace;
    const auto tag = "run " + std::to_string(run);
    const int n = static_cast<int>(t.entries.size());
    steps += n - 1;

    check.expect(t.sealed, tag + ": unsealed");
    check.expect(n >= 1 && n <= t_max + 1, tag + ": " + std::to_string(n) + " entries");
    check.expect(w.optimizer_calls() == n - 1, tag + ": optimizer call count");
    for (int i = 1; i < n; ++i) {
      const auto& prev = t.entries[i - 1];
      const auto want = (config.privacy_only || prev.p < k + 1) ? OptimizerMode::privacy
                                                                : OptimizerMode::utility;
      check.expect(t.entries[i].mode == want, tag + ": mode at " + std::to_string(i));
      check.expect(!(prev.p == k + 1 && prev.u >= u_max), tag + ": continued past objectives");
    }
    const auto& last = t.entries.back();
    const bool met = last.p == k + 1 && last.u >= u_max;
    if (t.stop_reason == StopReason::objectives_met) {
      check.expect(met, tag + ": objectives_met without objectives");
    } else {
      check.expect(t.stop_reason == StopReason::iteration_cap && n == t_max + 1 && !met,
                   tag + ": stop reason");
    }
    const auto final_vec = std::pair(t.final_entry().p, t.final_entry().u);
    for (const auto& e : t.entries) {
      check.expect(!(std::pair(e.p, e.u) > final_vec), tag + ": final dominated");
      if (std::pair(e.p, e.u) == final_vec) {
        check.expect(e.iteration <= t.final_iteration, tag + ": tie not broken by recency");
      }
    }
  }
  // Original already optimal: no optimizer call at all.
  World fast(testing::test_config(10, 5, 90), [](const ChatRequest&) -> std::string {
    throw EvaluationError("optimizer must not be called");
  });
  const auto out = fast.run(11, 95);
  check.expect(fast.optimizer_calls() == 0 && out.trace.entries.size() == 1 &&
                   out.trace.stop_reason == StopReason::objectives_met,
               "fast path");
  return check.done("200 runs, " + std::to_string(steps) + " steps; fast path 0 optimizer calls");
}

// --- two-phase shape --------------------------------------------------------------

Outcome two_phase() {
  const int k = 10;
  auto replies = std::make_shared<std::deque<std::string>>(std::deque<std::string>{
      wrap(marked("v1", 5, 60)), wrap(marked("v2", k + 1, 55)), wrap(marked("v3", k + 1, 70))});
  World w(testing::test_config(k, 3, 90), [replies](const ChatRequest&) {
    auto r = replies->front();
    replies->pop_front();
    return r;
  });
  const auto out = w.run(1, 70);
  const auto& e = out.trace.entries;
  Check check;
  check.expect(e.size() == 4, "entry count " + std::to_string(e.size()));
  if (e.size() == 4) {
    check.expect(e[2].p == k + 1 && e[1].p < k + 1, "p reaches K+1 at t=2");
    check.expect(e[1].u <= e[0].u && e[2].u <= e[1].u, "u non-increasing through t<=2");
    check.expect(e[3].u > e[2].u, "u strictly increasing at t=3");
    check.expect(e[1].mode == OptimizerMode::privacy && e[2].mode == OptimizerMode::privacy &&
                     e[3].mode == OptimizerMode::utility,
                 "privacy, privacy, utility modes");
    check.expect(out.trace.final_iteration == 3, "final iteration");
  }
  std::string u;
  for (const auto& x : e) u += (u.empty() ? "" : ",") + std::to_string(x.u);
  return check.done("u = " + u);
}

// --- metrics oracle ---------------------------------------------------------------

Outcome metrics_oracle() {
  Check check;
  const auto m = utility_metrics({"A", "A", "B", "B", "C", "C"}, {"A", "B", "B", "B", "C", "A"});
  check.expect(std::abs(m.accuracy - 66.66666666666667) <= 1e-9, "accuracy");
  check.expect(std::abs(m.macro_precision - 72.22222222222222) <= 1e-9, "macro precision");
  check.expect(std::abs(m.macro_recall - 66.66666666666667) <= 1e-9, "macro recall");
  check.expect(std::abs(m.macro_f1 - 65.55555555555556) <= 1e-9, "macro F1");
  const ClassProbs uniform{{"a", 0.25}, {"b", 0.25}, {"c", 0.25}, {"d", 0.25}};
  const std::vector<ClassProbs> probs(4, uniform);
  const auto loss = utility_metrics({"a", "b", "c", "d"}, {"a", "a", "a", "a"}, &probs).mean_loss;
  check.expect(loss && std::abs(*loss - std::log(4.0)) <= 1e-12, "uniform loss");
  const std::vector<double> a{72.1, 65.4, 80.2, 59.9, 70.0, 66.3, 74.8, 61.2, 69.5, 77.7};
  const std::vector<double> b{70.3, 66.0, 75.1, 58.2, 68.4, 62.9, 74.0, 60.5, 65.1, 73.3};
  const auto t = paired_t_test_one_tailed(a, b);
  check.expect(std::abs(t.p_value - 0.0018193073002217672) <= 1e-6, "t-test p-value");
  std::ostringstream s;
  s.precision(10);
  s << "F1 " << m.macro_f1 << ", loss " << loss.value_or(-1) << ", p " << t.p_value;
  return check.done(s.str());
}

// --- success rate statistics ------------------------------------------------------

std::vector<AttackInstance> selection_instances(int n) {
  std::vector<AttackInstance> out;
  for (int i = 0; i < n; ++i) {
    AttackInstance inst;
    inst.record_id = "r" + std::to_string(i);
    inst.anonymized_text = "anonymized " + std::to_string(i);
    inst.candidates = {"Ann One", "Ben Two", "Cy Three", "Di Four", "Eve Five"};
    inst.truth_index = truth_position(11, inst.record_id, 5);
    out.push_back(std::move(inst));
  }
  return out;
}

Outcome sr_statistics() {
  const auto instances = selection_instances(1000);
  AttackConfig config;
  config.n_candidates = 5;
  config.model_id = "scripted";
  Check check;

  auto rng = std::make_shared<std::mt19937_64>(99);
  Gateway uniform_gw(std::make_shared<CallbackBackend>([rng](const ChatRequest&) {
    return std::to_string(1 + (*rng)() % 5);
  }));
  const auto uniform = success_rate(instances, config, uniform_gw, testing::bundled_registry());
  const double sigma = std::sqrt(0.2 * 0.8 / 1000.0) * 100.0;
  check.expect(std::abs(uniform.success_rate - 20.0) <= 3 * sigma,
               "uniform SR " + std::to_string(uniform.success_rate));

  std::map<std::string, int> truth;
  for (const auto& inst : instances) truth[inst.record_id] = inst.truth_index;
  Gateway echo_gw(std::make_shared<CallbackBackend>([&truth](const ChatRequest& r) {
    return std::to_string(truth.at(r.record_id) + 1);
  }));
  const auto echo = success_rate(instances, config, echo_gw, testing::bundled_registry());
  check.expect(echo.success_rate == 100.0, "truth-echo SR " + std::to_string(echo.success_rate));

  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  s << "uniform " << uniform.success_rate << " (20.00 +/- " << 3 * sigma << "), truth-echo "
    << echo.success_rate;
  return check.done(s.str());
}

// --- determinism and resume -------------------------------------------------------

std::map<std::string, std::string> canonical_dir(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    out[entry.path().filename().string()] =
        canonicalize(json::parse(testing::read_file(entry.path()))).dump(2);
  }
  return out;
}

Outcome determinism_resume() {
  const auto cli = testing::fixture_dir() / "cli";
  const auto config = load_config(cli / "config.json");
  testing::TempDir dir("lexanon-acceptance");
  Check check;

  const auto first = make_run_context(config);
  run_corpus(cli / "corpus.jsonl", first, dir / "a");
  const auto second = make_run_context(config);
  run_corpus(cli / "corpus.jsonl", second, dir / "b");
  const auto a = canonical_dir(dir / "a" / "traces");
  const auto b = canonical_dir(dir / "b" / "traces");
  check.expect(a.size() == 3, "trace count " + std::to_string(a.size()));
  check.expect(a == b, "canonical trace directories differ");
  check.expect(testing::read_file(dir / "a" / "anonymized.jsonl") ==
                   testing::read_file(dir / "b" / "anonymized.jsonl"),
               "anonymized outputs differ");

  const auto third = make_run_context(config);
  const auto summary = run_corpus(cli / "corpus.jsonl", third, dir / "a", {1, true});
  check.expect(third.gateway->backend_calls() == 0,
               "resume made " + std::to_string(third.gateway->backend_calls()) + " calls");
  check.expect(summary.skipped == 3, "resume skipped " + std::to_string(summary.skipped));
  check.expect(canonical_dir(dir / "a" / "traces") == a, "resume changed traces");
  return check.done(std::to_string(a.size()) + " traces identical; resume made " +
                    std::to_string(third.gateway->backend_calls()) + " calls");
}

// --- distillation export ------------------------------------------------------------

Outcome distill_export() {
  const auto dir = testing::fixture_dir() / "traces";
  Check check;
  // Expected counts straight from the fixture files.
  int expected_pairs = 0, eligible = 0, sealed = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto j = json::parse(testing::read_file(entry.path()));
    if (!j.at("sealed").get<bool>()) continue;
    ++sealed;
    if (j.at("stop_reason") == "evaluation_error") continue;
    ++eligible;
    expected_pairs += std::max(j.at("final_iteration").get<int>() - 1, 0);
  }
  const auto traces = read_trace_dir(dir);
  const auto dpo = build_dpo(traces);
  check.expect(static_cast<int>(dpo.pairs.size()) == expected_pairs,
               "pairs " + std::to_string(dpo.pairs.size()) + " vs " +
                   std::to_string(expected_pairs));
  std::map<std::string, const OptimizationTrace*> by_id;
  for (const auto& t : traces) by_id[t.record_id] = &t;
  const ObjectiveBounds bounds{10, 100};
  for (const auto& pair : dpo.pairs) {
    const auto& t = *by_id.at(pair.record_id);
    const auto& f = t.final_entry();
    const auto& r = t.entries.at(pair.rejected_iteration);
    check.expect(pair.chosen == f.text && pair.rejected == r.text, pair.record_id + ": texts");
    check.expect(lex_prefers(ObjectiveVector(f.p, f.u, bounds), ObjectiveVector(r.p, r.u, bounds)),
                 pair.record_id + ": not strictly dominated");
  }
  const auto sft = build_sft(traces);
  check.expect(static_cast<int>(sft.size()) == eligible, "SFT rows");
  ExportOptions all;
  all.include_errored = true;
  check.expect(static_cast<int>(build_sft(traces, all).size()) == sealed,
               "SFT rows with errored traces");
  return check.done(std::to_string(dpo.pairs.size()) + " pairs; " + std::to_string(sft.size()) +
                    " SFT rows (" + std::to_string(sealed) + " sealed incl. errored)");
}

// --- K/T sweep ----------------------------------------------------------------------

// Each rewrite pushes the subject two ranks deeper in the adversary's list.
struct SweepPoint {
  int final_p = 0;
  int privacy_steps = 0;
};

SweepPoint sweep(int k, int t_max) {
  auto config = testing::test_config(k, t_max, 100);
  World w(config, [k](const ChatRequest& r) {
    const auto [p, u] = testing::read_marker(testing::last_user(r)).value();
    return wrap(marked("rewrite", std::min(p + 2, k + 1), u));
  });
  const auto out = w.run(1, 50);
  SweepPoint point{out.trace.final_entry().p, 0};
  for (const auto& e : out.trace.entries) {
    if (e.mode == OptimizerMode::privacy) ++point.privacy_steps;
  }
  return point;
}

Outcome kt_sweep() {
  Check check;
  std::ostringstream s;
  SweepPoint prev{0, 0};
  s << "K sweep (T=5):";
  for (int k : {1, 5, 10}) {
    const auto pt = sweep(k, 5);
    s << " K=" << k << " p=" << pt.final_p << " steps=" << pt.privacy_steps;
    check.expect(pt.final_p > prev.final_p, "final p not increasing at K=" + std::to_string(k));
    check.expect(pt.privacy_steps > prev.privacy_steps,
                 "privacy steps not increasing at K=" + std::to_string(k));
    prev = pt;
  }
  prev = {0, 0};
  s << "; T sweep (K=10):";
  for (int t : {1, 3, 5}) {
    const auto pt = sweep(10, t);
    s << " T=" << t << " p=" << pt.final_p;
    check.expect(pt.final_p > prev.final_p, "final p not increasing at T=" + std::to_string(t));
    prev = pt;
  }
  return check.done(s.str());
}

// --- live smoke -----------------------------------------------------------------------

Outcome live_smoke() {
  const char* key = std::getenv("LEXANON_API_KEY");
  if (!key || !*key) return {Outcome::skip, "LEXANON_API_KEY not set"};
  return {Outcome::skip, "covered by the live_smoke gtest (credentials present)"};
}

struct Criterion {
  const char* name;
  Outcome (*fn)();
  double budget_s;
};

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  const Criterion criteria[] = {
      {"rank-score exactness", rank_score, 1.0},
      {"lexicographic correctness", lex_order, 5.0},
      {"mode machine", mode_machine, 10.0},
      {"two-phase shape", two_phase, 5.0},
      {"metrics oracle", metrics_oracle, 5.0},
      {"success-rate statistics", sr_statistics, 10.0},
      {"determinism and resume", determinism_resume, 30.0},
      {"distillation export", distill_export, 5.0},
      {"K/T tradeoff", kt_sweep, 10.0},
      {"live smoke", live_smoke, 180.0},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = {Outcome::fail, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (o.status != Outcome::skip && secs > c.budget_s) {
      o = {Outcome::fail, "over budget (" + std::to_string(secs) + " s > " +
                              std::to_string(c.budget_s) + " s): " + o.detail};
    }
    const char* label = o.status == Outcome::pass ? "PASS" : (o.status == Outcome::fail ? "FAIL" : "SKIP");
    if (o.status == Outcome::fail) ++failed;
    std::ostringstream time;
    time.setf(std::ios::fixed);
    time.precision(3);
    time << secs;
    std::cout << label << "  " << c.name << "  [" << time.str() << " s]  " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
