#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "lexanon/core.hpp"

namespace lexanon {

enum class BackendKind { scripted, openai };
enum class UtilityMode { judge, predictor };

/// Chat backend settings. Credentials are read from the environment at
/// gateway construction; only the variable names live here.
struct BackendConfig {
  BackendKind kind = BackendKind::scripted;
  std::string model_id = "gpt-4";
  std::string endpoint;  // empty: $LEXANON_API_BASE, else https://api.openai.com/v1
  std::string api_key_env = "LEXANON_API_KEY";
  std::filesystem::path script_path;  // scripted backend fixture (JSON-lines)
  double evaluator_temperature = 0.0;
  double optimizer_temperature = 0.7;
  int max_output_tokens = 1024;
  int retry_count = 3;
  int initial_backoff_ms = 500;
  double backoff_factor = 2.0;
  bool cache = true;
  int requests_per_minute = 0;  // 0 = unlimited
  int timeout_seconds = 120;
  std::optional<std::uint64_t> seed;
};

struct RunConfig {
  int k_guesses = 10;
  int max_iterations = 5;  // rewrite budget T; the t=0 evaluation is extra
  int u_max = 90;
  int u_scale = 100;
  bool privacy_only = false;
  int memory_window = 0;  // 0 = max_iterations + 1, i.e. the whole memory
  bool surname_match = false;
  std::string dataset_profile = "biography";
  std::filesystem::path template_dir;  // empty = bundled templates
  UtilityMode utility_mode = UtilityMode::judge;
  std::filesystem::path prediction_table;
  BackendConfig backend;

  ObjectiveBounds bounds() const { return {k_guesses, u_scale}; }
  int effective_memory_window() const {
    return memory_window > 0 ? memory_window : max_iterations + 1;
  }

  /// Throws ConfigError on an out-of-range field.
  void validate() const;
};

/// Reads a JSON config file. Unknown keys are rejected.
RunConfig load_config(const std::filesystem::path& path);

/// Same schema as the file, applied on top of `base`.
RunConfig merge_config(RunConfig base, const nlohmann::json& overrides);

/// Full snapshot, stored in every trace.
nlohmann::json to_json(const RunConfig& config);

}  // namespace lexanon
