#include "lexanon/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "lexanon/attack.hpp"
#include "lexanon/config.hpp"
#include "lexanon/corpus.hpp"
#include "lexanon/distill_export.hpp"
#include "lexanon/error.hpp"
#include "lexanon/metrics.hpp"
#include "lexanon/pipeline.hpp"
#include "lexanon/significance.hpp"
#include "lexanon/trace.hpp"

namespace lexanon::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

/// Raised for problems the user can fix on the command line (exit 2).
class UsageError : public Error {
 public:
  using Error::Error;
};

struct AnonymizeArgs {
  fs::path config;
  fs::path corpus;
  fs::path out;
  int workers = 1;
  bool resume = false;
  bool strict = false;
  fs::path script;
  fs::path templates;
  std::optional<std::uint64_t> seed;
  std::optional<int> k_guesses;
  std::optional<int> max_iterations;
  bool privacy_only = false;
};

struct EvaluateArgs {
  fs::path config;
  fs::path corpus;
  fs::path run;
  fs::path out;
  fs::path script;
  fs::path templates;
  fs::path predictions;
  fs::path compare;
  int n_candidates = 5;
  std::uint64_t seed = 0;
  std::vector<std::string> categorical_options;
};

struct ExportArgs {
  fs::path run;
  fs::path traces;
  std::string mode = "sft";
  fs::path out;
  std::string instruction{kDefaultDistillInstruction};
  bool include_x0 = false;
  bool no_strict = false;
  bool include_errored = false;
};

struct InspectArgs {
  std::string target;
  fs::path run = ".";
  bool as_json = false;
  bool show_text = false;
};

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw UsageError(what + " not found: " + path.string());
}

RunConfig resolve_config(const fs::path& config_path, const fs::path& script,
                         const fs::path& templates) {
  require_file(config_path, "config");
  auto config = load_config(config_path);
  if (!script.empty()) {
    require_file(script, "script");
    config.backend.kind = BackendKind::scripted;
    config.backend.script_path = script;
  }
  if (!templates.empty()) config.template_dir = templates;
  return config;
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << content;
}

std::string fixed(double v, int digits = 2) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

ordered_json usage_json(const UsageSummary& u) {
  return ordered_json{{"calls", u.calls},
                      {"cached_calls", u.cached_calls},
                      {"prompt_tokens", u.prompt_tokens},
                      {"completion_tokens", u.completion_tokens},
                      {"mean_latency_ms", u.mean_latency_ms}};
}

// --- anonymize ---------------------------------------------------------------

int cmd_anonymize(const AnonymizeArgs& a, std::ostream& out) {
  auto config = resolve_config(a.config, a.script, a.templates);
  require_file(a.corpus, "corpus");
  if (a.seed) config.backend.seed = a.seed;
  if (a.k_guesses) config.k_guesses = *a.k_guesses;
  if (a.max_iterations) config.max_iterations = *a.max_iterations;
  if (a.privacy_only) config.privacy_only = true;
  if (a.workers < 1) throw UsageError("--workers must be >= 1");

  const auto ctx = make_run_context(config);
  const auto summary = run_corpus(a.corpus, ctx, a.out, {a.workers, a.resume});
  const auto usage = ctx.gateway->usage_summary();

  out << "records:   " << summary.records << '\n'
      << "completed: " << summary.completed << '\n'
      << "errored:   " << summary.errored << '\n'
      << "skipped:   " << summary.skipped << '\n'
      << "mean p:    " << fixed(summary.mean_p) << " / " << config.bounds().privacy_max() << '\n'
      << "mean u:    " << fixed(summary.mean_u) << " / " << config.u_scale << '\n'
      << "calls:     " << usage.calls << " (" << usage.cached_calls << " cached), "
      << usage.prompt_tokens << " prompt + " << usage.completion_tokens
      << " completion tokens\n"
      << "traces:    " << RunLayout{a.out}.traces().string() << '\n';
  if (a.strict && summary.errored > 0) return kExitPartial;
  return kExitOk;
}

// --- evaluate ----------------------------------------------------------------

ordered_json compare_block(const std::string& metric, const std::string& hypothesis,
                           const std::map<std::string, double>& better,
                           const std::map<std::string, double>& worse) {
  std::vector<double> a, b;
  for (const auto& [id, v] : better) {
    if (auto it = worse.find(id); it != worse.end()) {
      a.push_back(v);
      b.push_back(it->second);
    }
  }
  ordered_json block{{"metric", metric}, {"hypothesis", hypothesis}, {"pairs", a.size()}};
  try {
    const auto t = paired_t_test_one_tailed(a, b);
    block["t"] = t.t;
    block["df"] = t.degrees_of_freedom;
    block["p_value"] = t.p_value;
  } catch (const PreconditionError& e) {
    block["error"] = e.what();
  }
  return block;
}

std::map<std::string, double> per_record(const json& report, const char* block, const char* key,
                                         double scale) {
  std::map<std::string, double> out;
  if (!report.contains(block) || !report.at(block).contains(key)) return out;
  for (const auto& [id, v] : report.at(block).at(key).items()) {
    out[id] = v.is_boolean() ? (v.get<bool>() ? scale : 0.0) : v.get<double>();
  }
  return out;
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  auto config = resolve_config(a.config, a.script, a.templates);
  require_file(a.corpus, "corpus");
  const RunLayout layout{a.run};
  require_file(layout.anonymized(), "anonymized output");
  if (a.n_candidates < 2) throw UsageError("--n-candidates must be >= 2");
  if (!a.predictions.empty()) require_file(a.predictions, "predictions");
  json prior;
  if (!a.compare.empty()) {
    const auto path = fs::is_directory(a.compare) ? a.compare / "report.json" : a.compare;
    require_file(path, "comparison report");
    std::ifstream in(path);
    try {
      prior = json::parse(in);
    } catch (const json::exception& e) {
      throw UsageError("cannot parse " + path.string() + ": " + e.what());
    }
  }

  const auto records = load_corpus(a.corpus);
  std::map<std::string, std::string> anonymized;
  for (auto& row : load_anonymized(layout.anonymized())) anonymized[row.id] = std::move(row.text);

  const auto ctx = make_run_context(config);
  AttackConfig attack;
  attack.n_candidates = a.n_candidates;
  attack.seed = a.seed;
  attack.categorical_options = a.categorical_options;
  attack.profile = config.dataset_profile;
  attack.model_id = ctx.config.backend.model_id;
  attack.temperature = config.backend.evaluator_temperature;
  attack.max_output_tokens = config.backend.max_output_tokens;

  fs::create_directories(a.out);
  ordered_json report;
  report["run"] = a.run.string();
  report["records"] = records.size();
  report["attack"] = {{"n_candidates", a.n_candidates},
                      {"seed", a.seed},
                      {"model_id", attack.model_id}};
  std::ostringstream text;
  text << "evaluation of " << a.run.string() << " (" << records.size() << " records)\n";

  // Re-identification by selection.
  const auto set = build_attack_set(records, anonymized, attack, *ctx.gateway, *ctx.registry);
  {
    std::ofstream inst_out(a.out / "attack_set.jsonl", std::ios::trunc);
    for (const auto& inst : set.instances) inst_out << to_json(inst).dump() << '\n';
    std::ofstream drop_out(a.out / "dropped.jsonl", std::ios::trunc);
    for (const auto& d : set.dropped) {
      drop_out << ordered_json{{"record_id", d.record_id}, {"reason", d.reason}}.dump() << '\n';
    }
  }
  ordered_json dropped = ordered_json::array();
  for (const auto& d : set.dropped) dropped.push_back({{"record_id", d.record_id}, {"reason", d.reason}});
  if (set.instances.empty()) {
    report["success_rate"] = {{"omitted", "no attack instance could be built"}, {"dropped", dropped}};
    text << "SR: omitted (no attack instance could be built)\n";
  } else {
    const auto sr = success_rate(set.instances, attack, *ctx.gateway, *ctx.registry);
    ordered_json outcomes = ordered_json::object();
    std::ofstream log(a.out / "sr_outcomes.jsonl", std::ios::trunc);
    std::map<std::string, int> truth;
    for (const auto& inst : set.instances) truth[inst.record_id] = inst.truth_index;
    for (const auto& o : sr.outcomes) {
      outcomes[o.record_id] = o.success;
      log << ordered_json{{"record_id", o.record_id},
                          {"pick", o.pick},
                          {"truth_index", truth[o.record_id]},
                          {"success", o.success},
                          {"flagged", o.flagged}}
                 .dump()
          << '\n';
    }
    report["success_rate"] = {{"value", sr.success_rate},   {"instances", sr.instances},
                              {"successes", sr.successes},  {"flagged", sr.flagged},
                              {"n_candidates", sr.n_candidates}, {"dropped", dropped},
                              {"outcomes", outcomes}};
    text << "SR: " << fixed(sr.success_rate) << " (" << sr.successes << "/" << sr.instances
         << ", " << sr.flagged << " unparseable, " << set.dropped.size() << " dropped)\n";
  }

  // Confidence score.
  if (anonymized.empty()) {
    report["confidence_score"] = {{"omitted", "no anonymized text"}};
    text << "CS: omitted (no anonymized text)\n";
  } else {
    const auto cs = confidence_score(records, anonymized, attack, *ctx.gateway, *ctx.registry);
    report["confidence_score"] = {{"value", cs.mean},
                                  {"records", cs.scores.size()},
                                  {"flagged", cs.flagged},
                                  {"scores", cs.scores}};
    text << "CS: " << fixed(cs.mean) << " (" << cs.scores.size() << " records, "
         << cs.flagged.size() << " unparseable)\n";
  }

  // Downstream utility from an external predictor.
  if (a.predictions.empty()) {
    report["utility"] = {{"omitted", "no prediction file given"}};
    text << "utility: omitted (no prediction file given)\n";
  } else {
    std::map<std::string, Prediction> by_id;
    for (auto& p : load_predictions(a.predictions)) by_id[p.record_id] = std::move(p);
    std::vector<std::string> gold, pred;
    std::vector<ClassProbs> probs;
    bool all_probs = true;
    int missing = 0;
    ordered_json correct = ordered_json::object();
    for (const auto& r : records) {
      auto it = by_id.find(r.id);
      if (it == by_id.end()) {
        ++missing;
        continue;
      }
      gold.push_back(r.task_label);
      pred.push_back(it->second.predicted_label);
      correct[r.id] = r.task_label == it->second.predicted_label;
      if (it->second.probs) {
        probs.push_back(*it->second.probs);
      } else {
        all_probs = false;
      }
    }
    if (gold.empty()) {
      report["utility"] = {{"omitted", "no prediction matches a corpus record"}};
      text << "utility: omitted (no prediction matches a corpus record)\n";
    } else {
      const auto m = utility_metrics(gold, pred, all_probs ? &probs : nullptr);
      ordered_json block{{"accuracy", m.accuracy},
                         {"macro_precision", m.macro_precision},
                         {"macro_recall", m.macro_recall},
                         {"macro_f1", m.macro_f1}};
      block["loss"] = m.mean_loss ? json(*m.mean_loss) : json(nullptr);
      block["items"] = gold.size();
      block["missing_predictions"] = missing;
      block["zero_prediction_classes"] = m.zero_prediction_classes;
      block["correct"] = correct;
      report["utility"] = block;
      text << "utility: accuracy " << fixed(m.accuracy) << ", P " << fixed(m.macro_precision)
           << ", R " << fixed(m.macro_recall) << ", F1 " << fixed(m.macro_f1);
      if (m.mean_loss) text << ", loss " << fixed(*m.mean_loss, 4);
      text << " (" << gold.size() << " items, " << missing << " without prediction)\n";
    }
  }

  // Per-iteration means from the traces.
  if (fs::is_directory(layout.traces())) {
    const auto curve = iteration_curves(layout.traces());
    ordered_json points = ordered_json::array();
    for (const auto& c : curve) {
      points.push_back({{"iteration", c.iteration},
                        {"records", c.records},
                        {"mean_p", c.mean_p},
                        {"mean_u", c.mean_u}});
    }
    report["curves"] = points;
    std::ofstream tsv(a.out / "curves.tsv", std::ios::trunc);
    write_curves_tsv(tsv, curve);
  }

  if (!prior.is_null()) {
    ordered_json cmp = ordered_json::array();
    const auto cs_now = per_record(report, "confidence_score", "scores", 1.0);
    const auto cs_prior = per_record(prior, "confidence_score", "scores", 1.0);
    cmp.push_back(compare_block("confidence_score", "current < prior", cs_prior, cs_now));
    const auto sr_now = per_record(report, "success_rate", "outcomes", 100.0);
    const auto sr_prior = per_record(prior, "success_rate", "outcomes", 100.0);
    cmp.push_back(compare_block("success_rate", "current < prior", sr_prior, sr_now));
    const auto acc_now = per_record(report, "utility", "correct", 100.0);
    const auto acc_prior = per_record(prior, "utility", "correct", 100.0);
    cmp.push_back(compare_block("accuracy", "current > prior", acc_now, acc_prior));
    report["comparison"] = {{"prior", a.compare.string()}, {"tests", cmp}};
    text << "paired one-tailed t-tests against " << a.compare.string() << ":\n";
    for (const auto& c : cmp) {
      text << "  " << c["metric"].get<std::string>() << " (" << c["hypothesis"].get<std::string>()
           << ", " << c["pairs"].get<std::size_t>() << " pairs): ";
      if (c.contains("error")) {
        text << "n/a (" << c["error"].get<std::string>() << ")\n";
      } else {
        text << "t = " << fixed(c["t"].get<double>(), 4)
             << ", p = " << fixed(c["p_value"].get<double>(), 6) << '\n';
      }
    }
  }

  report["usage"] = usage_json(ctx.gateway->usage_summary());
  write_text(a.out / "report.json", report.dump(2) + "\n");
  write_text(a.out / "report.txt", text.str());
  out << text.str();
  return kExitOk;
}

// --- export-distill ------------------------------------------------------------

int cmd_export(const ExportArgs& a, std::ostream& out) {
  if (a.run.empty() == a.traces.empty()) throw UsageError("give exactly one of --run or --traces");
  const auto dir = a.traces.empty() ? RunLayout{a.run}.traces() : a.traces;
  if (!fs::is_directory(dir)) throw UsageError("trace directory not found: " + dir.string());
  ExportOptions options;
  options.instruction = a.instruction;
  options.include_x0 = a.include_x0;
  options.strict = !a.no_strict;
  options.include_errored = a.include_errored;
  if (a.mode == "sft") {
    const int n = export_sft(dir, a.out, options);
    out << "wrote " << n << " SFT rows to " << a.out.string() << '\n';
  } else {
    const int n = export_dpo(dir, a.out, options);
    out << "wrote " << n << " preference pairs to " << a.out.string() << '\n';
  }
  return kExitOk;
}

// --- inspect-trace ---------------------------------------------------------------

int cmd_inspect(const InspectArgs& a, std::ostream& out) {
  fs::path path = a.target;
  if (!fs::is_regular_file(path)) path = RunLayout{a.run}.traces() / trace_file_name(a.target);
  if (!fs::is_regular_file(path)) throw UsageError("trace not found: " + a.target);
  const auto trace = read_trace(path);
  if (a.as_json) {
    out << to_json(trace).dump(2) << '\n';
    return kExitOk;
  }
  const int k = trace.config.value("k_guesses", 0);
  const int scale = trace.config.value("u_scale", 0);
  out << "record " << trace.record_id << (trace.sealed ? "" : " (unsealed)") << '\n'
      << "stop: " << to_string(trace.stop_reason) << ", final iteration "
      << trace.final_iteration << '\n';
  if (trace.error) out << "error: " << *trace.error << '\n';
  out << '\n'
      << std::left << std::setw(6) << "iter" << std::setw(10) << "mode" << std::setw(9) << "p"
      << std::setw(9) << "u" << std::setw(7) << "rank" << std::setw(7) << "calls"
      << std::setw(16) << "tokens in/out" << "notes\n";
  for (const auto& e : trace.entries) {
    std::string notes;
    if (e.iteration == trace.final_iteration) notes = "final";
    if (!e.errors.empty()) {
      notes += notes.empty() ? "" : "; ";
      notes += std::to_string(e.errors.size()) + " error(s)";
    }
    out << std::left << std::setw(6) << e.iteration << std::setw(10)
        << (e.mode ? std::string(to_string(*e.mode)) : std::string("-")) << std::setw(9)
        << (std::to_string(e.p) + "/" + std::to_string(k + 1)) << std::setw(9)
        << (std::to_string(e.u) + "/" + std::to_string(scale)) << std::setw(7)
        << (e.matched_rank ? std::to_string(*e.matched_rank) : std::string("-")) << std::setw(7)
        << e.calls.size() << std::setw(16)
        << (std::to_string(e.prompt_tokens()) + "/" + std::to_string(e.completion_tokens()))
        << notes << '\n';
  }
  out << "\ntotal: " << trace.call_count() << " calls, " << trace.prompt_tokens()
      << " prompt + " << trace.completion_tokens() << " completion tokens, "
      << trace.wall_time_ms << " ms\n";
  if (a.show_text) {
    for (const auto& e : trace.entries) {
      out << "\n--- iteration " << e.iteration << " ---\n" << e.text << '\n';
      for (const auto& err : e.errors) out << "! " << err << '\n';
    }
  } else if (!trace.entries.empty()) {
    out << "\nfinal text:\n" << trace.final_entry().text << '\n';
  }
  return kExitOk;
}

void set_log_level(const std::string& level) {
  static const std::map<std::string, spdlog::level::level_enum> levels{
      {"trace", spdlog::level::trace}, {"debug", spdlog::level::debug},
      {"info", spdlog::level::info},   {"warn", spdlog::level::warn},
      {"error", spdlog::level::err},   {"off", spdlog::level::off}};
  spdlog::set_level(levels.at(level));
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Iterative privacy-first text anonymization with LLM rewriting", "lexanon"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "lexanon 0.3.0");
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "Diagnostic verbosity on stderr")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}))
      ->capture_default_str();

  AnonymizeArgs an;
  auto* anonymize = app.add_subcommand("anonymize", "Run the optimization loop over a corpus");
  anonymize->add_option("--config", an.config, "Run configuration (JSON)")->required();
  anonymize->add_option("--corpus", an.corpus, "Corpus (JSON lines)")->required();
  anonymize->add_option("--out", an.out, "Output directory")->required();
  anonymize->add_option("--workers", an.workers, "Records processed in parallel")
      ->capture_default_str();
  anonymize->add_flag("--resume", an.resume, "Skip records that already have a sealed trace");
  anonymize->add_flag("--strict", an.strict, "Exit 1 when any record stopped on an error");
  anonymize->add_option("--script", an.script, "Scripted backend replies; overrides the backend");
  anonymize->add_option("--templates", an.templates, "Prompt template directory");
  anonymize->add_option("--seed", an.seed, "Provider sampling seed");
  anonymize->add_option("--k-guesses", an.k_guesses, "Override the adversary guess count K");
  anonymize->add_option("--max-iterations", an.max_iterations,
                        "Override the rewrite budget T");
  anonymize->add_flag("--privacy-only", an.privacy_only, "Never switch to utility mode");

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Measure re-identification risk and utility");
  evaluate->add_option("--config", ev.config, "Run configuration (JSON)")->required();
  evaluate->add_option("--corpus", ev.corpus, "Corpus (JSON lines)")->required();
  evaluate->add_option("--run", ev.run, "Output directory of an anonymize run")->required();
  evaluate->add_option("--out", ev.out, "Report directory")->required();
  evaluate->add_option("--script", ev.script, "Scripted adversary replies; overrides the backend");
  evaluate->add_option("--templates", ev.templates, "Prompt template directory");
  evaluate->add_option("--predictions", ev.predictions,
                       "Downstream predictions (JSON lines); enables the utility block");
  evaluate->add_option("--compare", ev.compare,
                       "Earlier report (file or directory) for paired t-tests");
  evaluate->add_option("--n-candidates", ev.n_candidates, "Candidates per selection instance")
      ->capture_default_str();
  evaluate->add_option("--seed", ev.seed, "Seed for the truth position")->capture_default_str();
  evaluate->add_option("--categorical-options", ev.categorical_options,
                       "Option list for categorical attributes")
      ->delimiter(',');

  ExportArgs ex;
  auto* exporter = app.add_subcommand("export-distill", "Write SFT or DPO training data");
  auto* ex_run = exporter->add_option("--run", ex.run, "Output directory of an anonymize run");
  exporter->add_option("--traces", ex.traces, "Trace directory")->excludes(ex_run);
  exporter->add_option("--mode", ex.mode, "Dataset kind")
      ->check(CLI::IsMember({"sft", "dpo"}))
      ->capture_default_str();
  exporter->add_option("--out", ex.out, "Output file (JSON lines)")->required();
  exporter->add_option("--instruction", ex.instruction, "Instruction prepended to the input")
      ->capture_default_str();
  exporter->add_flag("--include-x0", ex.include_x0, "Allow the original text as a rejected sample");
  exporter->add_flag("--no-strict", ex.no_strict,
                     "Keep pairs whose rejected text outscores the final text");
  exporter->add_flag("--include-errored", ex.include_errored,
                     "Include traces stopped by an evaluation error");

  InspectArgs in;
  auto* inspect = app.add_subcommand("inspect-trace", "Print one trace as a table");
  inspect->add_option("target", in.target, "Record id or trace file")->required();
  inspect->add_option("--run", in.run, "Output directory of an anonymize run")
      ->capture_default_str();
  inspect->add_flag("--json", in.as_json, "Print the raw trace JSON");
  inspect->add_flag("--show-text", in.show_text, "Print the text of every iteration");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  set_log_level(log_level);
  try {
    if (*anonymize) return cmd_anonymize(an, out);
    if (*evaluate) return cmd_evaluate(ev, out);
    if (*exporter) return cmd_export(ex, out);
    if (*inspect) return cmd_inspect(in, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const CorpusError& e) {
    err << "corpus error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const TemplateError& e) {
    err << "template error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const PreconditionError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "failed: " << e.what() << '\n';
    return kExitPartial;
  } catch (const std::exception& e) {
    err << "failed: " << e.what() << '\n';
    return kExitPartial;
  }
  return kExitUsage;
}

}  // namespace lexanon::cli
