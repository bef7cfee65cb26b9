#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lexanon/trace.hpp"

namespace lexanon {

inline constexpr std::string_view kDefaultDistillInstruction =
    "Please anonymize the following biography:";

struct ExportOptions {
  std::string instruction{kDefaultDistillInstruction};
  bool include_errored = false;  // traces stopped by an evaluation error
  bool include_x0 = false;       // allow the original text as a rejected sample
  bool strict = true;            // drop pairs whose chosen does not lex-dominate
};

struct SftRow {
  std::string prompt;
  std::string completion;
};

struct PreferencePair {
  std::string prompt;
  std::string chosen;
  std::string rejected;
  std::string record_id;
  int rejected_iteration = 0;
};

struct DpoExport {
  std::vector<PreferencePair> pairs;
  int excluded_not_dominated = 0;
  int excluded_identical = 0;
  std::vector<std::string> traces_without_pairs;
};

std::string distill_prompt(const ExportOptions& options, std::string_view original_text);

std::vector<SftRow> build_sft(const std::vector<OptimizationTrace>& traces,
                              const ExportOptions& options = {});
DpoExport build_dpo(const std::vector<OptimizationTrace>& traces,
                    const ExportOptions& options = {});

/// Read sealed traces from `trace_dir`, write JSON-lines, return row count.
/// Throw PreconditionError when the directory holds no usable trace.
int export_sft(const std::filesystem::path& trace_dir, const std::filesystem::path& out_path,
               const ExportOptions& options = {});
int export_dpo(const std::filesystem::path& trace_dir, const std::filesystem::path& out_path,
               const ExportOptions& options = {});

}  // namespace lexanon
