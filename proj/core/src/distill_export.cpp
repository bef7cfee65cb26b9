#include "lexanon/distill_export.hpp"

#include <algorithm>
#include <fstream>
#include <utility>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "lexanon/error.hpp"

namespace lexanon {

using nlohmann::ordered_json;

namespace {

bool usable(const OptimizationTrace& trace, const ExportOptions& options) {
  if (!trace.sealed || trace.entries.empty()) return false;
  if (trace.final_iteration < 0 ||
      trace.final_iteration >= static_cast<int>(trace.entries.size())) {
    spdlog::warn("trace '{}' has an out-of-range final iteration; skipped", trace.record_id);
    return false;
  }
  return options.include_errored || trace.stop_reason != StopReason::evaluation_error;
}

std::vector<const OptimizationTrace*> sorted_usable(const std::vector<OptimizationTrace>& traces,
                                                    const ExportOptions& options) {
  std::vector<const OptimizationTrace*> out;
  for (const auto& t : traces) {
    if (usable(t, options)) out.push_back(&t);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto* a, const auto* b) { return a->record_id < b->record_id; });
  return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

std::vector<OptimizationTrace> load_dir(const std::filesystem::path& trace_dir) {
  if (!std::filesystem::is_directory(trace_dir)) {
    throw PreconditionError("trace directory " + trace_dir.string() + " does not exist");
  }
  return read_trace_dir(trace_dir);
}

}  // namespace

std::string distill_prompt(const ExportOptions& options, std::string_view original_text) {
  std::string prompt = options.instruction;
  prompt += "\n\n";
  prompt += original_text;
  return prompt;
}

std::vector<SftRow> build_sft(const std::vector<OptimizationTrace>& traces,
                              const ExportOptions& options) {
  std::vector<SftRow> rows;
  for (const auto* trace : sorted_usable(traces, options)) {
    rows.push_back({distill_prompt(options, trace->entries.front().text),
                    trace->final_entry().text});
  }
  return rows;
}

DpoExport build_dpo(const std::vector<OptimizationTrace>& traces, const ExportOptions& options) {
  DpoExport result;
  for (const auto* trace : sorted_usable(traces, options)) {
    const auto& final_entry = trace->final_entry();
    const auto prompt = distill_prompt(options, trace->entries.front().text);
    const int first = options.include_x0 ? 0 : 1;
    int emitted = 0;
    for (int t = first; t < trace->final_iteration; ++t) {
      const auto& entry = trace->entries[t];
      if (entry.text == final_entry.text) {
        ++result.excluded_identical;
        continue;
      }
      if (options.strict && std::pair(entry.p, entry.u) > std::pair(final_entry.p, final_entry.u)) {
        spdlog::warn("trace '{}': iteration {} outscores the final text; pair excluded",
                     trace->record_id, t);
        ++result.excluded_not_dominated;
        continue;
      }
      result.pairs.push_back({prompt, final_entry.text, entry.text, trace->record_id, t});
      ++emitted;
    }
    if (emitted == 0) {
      spdlog::info("trace '{}' contributes no preference pairs", trace->record_id);
      result.traces_without_pairs.push_back(trace->record_id);
    }
  }
  return result;
}

int export_sft(const std::filesystem::path& trace_dir, const std::filesystem::path& out_path,
               const ExportOptions& options) {
  const auto rows = build_sft(load_dir(trace_dir), options);
  if (rows.empty()) throw PreconditionError("no usable sealed trace in " + trace_dir.string());
  auto out = open_out(out_path);
  for (const auto& row : rows) {
    out << ordered_json{{"prompt", row.prompt}, {"completion", row.completion}}.dump() << '\n';
  }
  return static_cast<int>(rows.size());
}

int export_dpo(const std::filesystem::path& trace_dir, const std::filesystem::path& out_path,
               const ExportOptions& options) {
  const auto traces = load_dir(trace_dir);
  if (sorted_usable(traces, options).empty()) {
    throw PreconditionError("no usable sealed trace in " + trace_dir.string());
  }
  const auto result = build_dpo(traces, options);
  auto out = open_out(out_path);
  for (const auto& pair : result.pairs) {
    out << ordered_json{{"prompt", pair.prompt}, {"chosen", pair.chosen}, {"rejected", pair.rejected}}
               .dump()
        << '\n';
  }
  return static_cast<int>(result.pairs.size());
}

}  // namespace lexanon
