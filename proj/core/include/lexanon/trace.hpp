#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lexanon/core.hpp"
#include "lexanon/gateway.hpp"

namespace lexanon {

inline constexpr int kTraceSchemaVersion = 1;

enum class OptimizerMode { privacy, utility };
enum class StopReason { objectives_met, iteration_cap, evaluation_error };

std::string_view to_string(OptimizerMode mode);
std::string_view to_string(StopReason reason);
OptimizerMode optimizer_mode_from_string(std::string_view s);
StopReason stop_reason_from_string(std::string_view s);

/// One gateway round trip as seen by the caller.
struct CallRecord {
  RequestTag tag = RequestTag::privacy_infer;
  std::string prompt;  // last user message sent
  std::string reply;
  int prompt_tokens = 0;
  int completion_tokens = 0;
  bool cached = false;
  bool followup = false;  // format re-prompt within the same conversation
  std::int64_t latency_ms = 0;
};

struct TraceEntry {
  int iteration = 0;
  std::optional<OptimizerMode> mode;  // mode that produced this text; none at t=0
  std::string text;
  int p = 0;
  int u = 0;
  std::vector<std::string> guesses;
  std::string clues;
  std::optional<int> matched_rank;
  std::vector<std::string> errors;  // degraded evaluations, e.g. unparseable replies
  std::vector<CallRecord> calls;

  int prompt_tokens() const;
  int completion_tokens() const;
};

/// Complete log of one record's optimization.
///
/// Everything except `wall_time_ms` and per-call latencies is a pure
/// function of (record, config, backend replies); those two are serialized
/// under a separate "timing" key so canonical comparisons can drop it.
struct OptimizationTrace {
  std::string record_id;
  nlohmann::json config;
  std::vector<TraceEntry> entries;
  StopReason stop_reason = StopReason::iteration_cap;
  std::optional<std::string> error;
  int final_iteration = 0;
  std::int64_t wall_time_ms = 0;
  bool sealed = false;

  const TraceEntry& final_entry() const { return entries.at(final_iteration); }
  std::int64_t prompt_tokens() const;
  std::int64_t completion_tokens() const;
  std::int64_t call_count() const;
};

nlohmann::json to_json(const OptimizationTrace& trace);
/// Throws ProtocolError on schema mismatch.
OptimizationTrace trace_from_json(const nlohmann::json& j);

/// Drops the "timing" block.
nlohmann::json canonicalize(nlohmann::json trace_json);

/// File name for a record id; ids are percent-encoded outside [A-Za-z0-9._-].
std::string trace_file_name(std::string_view record_id);

void write_trace(const std::filesystem::path& path, const OptimizationTrace& trace);
OptimizationTrace read_trace(const std::filesystem::path& path);
/// Sealed traces in `dir`, sorted by record id. Unreadable files are skipped
/// with a warning.
std::vector<OptimizationTrace> read_trace_dir(const std::filesystem::path& dir);

}  // namespace lexanon
