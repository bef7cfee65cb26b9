#pragma once

#include <filesystem>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "lexanon/config.hpp"
#include "lexanon/gateway.hpp"
#include "lexanon/prompt_registry.hpp"
#include "lexanon/trace.hpp"
#include "lexanon/utility_evaluator.hpp"

namespace lexanon {

struct CorpusOptions {
  int workers = 1;
  bool resume = false;  // skip records whose sealed trace already exists
};

struct CorpusSummary {
  int records = 0;
  int completed = 0;  // sealed without an evaluation error
  int errored = 0;
  int skipped = 0;  // resumed from an existing sealed trace
  double mean_p = 0.0;
  double mean_u = 0.0;
};

/// Everything a corpus run needs besides the corpus itself.
struct RunContext {
  RunConfig config;
  std::shared_ptr<Gateway> gateway;
  std::shared_ptr<const PromptRegistry> registry;
  std::shared_ptr<const UtilityEvaluator> utility;
};

/// Builds the gateway (scripted or HTTP), registry and utility evaluator
/// described by `config`. Throws ConfigError when something is missing.
RunContext make_run_context(const RunConfig& config);

/// Layout of an output directory.
struct RunLayout {
  std::filesystem::path root;
  std::filesystem::path traces() const { return root / "traces"; }
  std::filesystem::path anonymized() const { return root / "anonymized.jsonl"; }
};

/// Runs every record and writes `traces/<id>.json` plus `anonymized.jsonl`
/// (one {id, text, p, u, stop_reason} line per record, corpus order).
/// Per-record failures are recorded and the batch continues.
CorpusSummary run_corpus(const std::filesystem::path& corpus_path, const RunContext& ctx,
                         const std::filesystem::path& out_dir, CorpusOptions options = {});

struct AnonymizedRow {
  std::string id;
  std::string text;
  int p = 0;
  int u = 0;
  std::string stop_reason;
};

std::vector<AnonymizedRow> load_anonymized(const std::filesystem::path& path);

struct CurvePoint {
  int iteration = 0;
  int records = 0;
  double mean_p = 0.0;
  double mean_u = 0.0;
};

/// Per-iteration means over the records that reached each iteration.
std::vector<CurvePoint> iteration_curves(const std::vector<OptimizationTrace>& traces);
std::vector<CurvePoint> iteration_curves(const std::filesystem::path& trace_dir);

/// Tab-separated "iteration records mean_p mean_u" with a header row.
void write_curves_tsv(std::ostream& out, const std::vector<CurvePoint>& curve);

}  // namespace lexanon
