#include "lexanon/config.hpp"

#include <fstream>
#include <set>

#include "lexanon/error.hpp"

namespace lexanon {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, std::string_view where) {
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) {
      throw ConfigError("unknown config key '" + std::string(where) + key + "'");
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

void read_path(const json& j, const char* key, fs::path& out, const fs::path& base) {
  if (!j.contains(key)) return;
  std::string s;
  read(j, key, s);
  fs::path p(s);
  out = (p.empty() || p.is_absolute() || base.empty()) ? p : base / p;
}

RunConfig apply(RunConfig cfg, const json& j, const fs::path& base) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j,
                 {"k_guesses", "max_iterations", "u_max", "u_scale", "privacy_only",
                  "memory_window", "surname_match", "dataset_profile", "template_dir",
                  "utility_mode", "prediction_table", "backend"},
                 "");
  read(j, "k_guesses", cfg.k_guesses);
  read(j, "max_iterations", cfg.max_iterations);
  read(j, "u_max", cfg.u_max);
  read(j, "u_scale", cfg.u_scale);
  read(j, "privacy_only", cfg.privacy_only);
  read(j, "memory_window", cfg.memory_window);
  read(j, "surname_match", cfg.surname_match);
  read(j, "dataset_profile", cfg.dataset_profile);
  read_path(j, "template_dir", cfg.template_dir, base);
  read_path(j, "prediction_table", cfg.prediction_table, base);
  if (j.contains("utility_mode")) {
    std::string mode;
    read(j, "utility_mode", mode);
    if (mode == "judge") {
      cfg.utility_mode = UtilityMode::judge;
    } else if (mode == "predictor") {
      cfg.utility_mode = UtilityMode::predictor;
    } else {
      throw ConfigError("utility_mode must be 'judge' or 'predictor'");
    }
  }
  if (j.contains("backend")) {
    const auto& b = j.at("backend");
    if (!b.is_object()) throw ConfigError("backend must be an object");
    reject_unknown(b,
                   {"kind", "model_id", "endpoint", "api_key_env", "script",
                    "evaluator_temperature", "optimizer_temperature", "max_output_tokens",
                    "retry_count", "initial_backoff_ms", "backoff_factor", "cache",
                    "requests_per_minute", "timeout_seconds", "seed"},
                   "backend.");
    auto& be = cfg.backend;
    if (b.contains("kind")) {
      std::string kind;
      read(b, "kind", kind);
      if (kind == "scripted") {
        be.kind = BackendKind::scripted;
      } else if (kind == "openai") {
        be.kind = BackendKind::openai;
      } else {
        throw ConfigError("backend.kind must be 'scripted' or 'openai'");
      }
    }
    read(b, "model_id", be.model_id);
    read(b, "endpoint", be.endpoint);
    read(b, "api_key_env", be.api_key_env);
    read_path(b, "script", be.script_path, base);
    read(b, "evaluator_temperature", be.evaluator_temperature);
    read(b, "optimizer_temperature", be.optimizer_temperature);
    read(b, "max_output_tokens", be.max_output_tokens);
    read(b, "retry_count", be.retry_count);
    read(b, "initial_backoff_ms", be.initial_backoff_ms);
    read(b, "backoff_factor", be.backoff_factor);
    read(b, "cache", be.cache);
    read(b, "requests_per_minute", be.requests_per_minute);
    read(b, "timeout_seconds", be.timeout_seconds);
    if (b.contains("seed")) {
      if (b.at("seed").is_null()) {
        be.seed.reset();
      } else {
        std::uint64_t seed = 0;
        read(b, "seed", seed);
        be.seed = seed;
      }
    }
  }
  cfg.validate();
  return cfg;
}

}  // namespace

void RunConfig::validate() const {
  if (k_guesses < 1) throw ConfigError("k_guesses must be >= 1");
  if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
  if (u_scale < 1) throw ConfigError("u_scale must be >= 1");
  if (u_max < 0 || u_max > u_scale) throw ConfigError("u_max must lie in [0, u_scale]");
  if (memory_window < 0) throw ConfigError("memory_window must be >= 0");
  if (dataset_profile.empty()) throw ConfigError("dataset_profile must be nonempty");
  if (utility_mode == UtilityMode::predictor && prediction_table.empty()) {
    throw ConfigError("utility_mode 'predictor' requires prediction_table");
  }
  if (backend.evaluator_temperature < 0 || backend.optimizer_temperature < 0) {
    throw ConfigError("temperatures must be >= 0");
  }
  if (backend.max_output_tokens < 1) throw ConfigError("backend.max_output_tokens must be >= 1");
  if (backend.retry_count < 0) throw ConfigError("backend.retry_count must be >= 0");
  if (backend.initial_backoff_ms < 0) throw ConfigError("backend.initial_backoff_ms must be >= 0");
  if (backend.backoff_factor < 1.0) throw ConfigError("backend.backoff_factor must be >= 1");
  if (backend.requests_per_minute < 0) throw ConfigError("backend.requests_per_minute must be >= 0");
  if (backend.timeout_seconds < 1) throw ConfigError("backend.timeout_seconds must be >= 1");
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return apply(RunConfig{}, j, path.parent_path());
}

RunConfig merge_config(RunConfig base, const json& overrides) {
  return apply(std::move(base), overrides, {});
}

json to_json(const RunConfig& c) {
  const auto& b = c.backend;
  return json{
      {"k_guesses", c.k_guesses},
      {"max_iterations", c.max_iterations},
      {"u_max", c.u_max},
      {"u_scale", c.u_scale},
      {"privacy_only", c.privacy_only},
      {"memory_window", c.effective_memory_window()},
      {"surname_match", c.surname_match},
      {"dataset_profile", c.dataset_profile},
      {"utility_mode", c.utility_mode == UtilityMode::judge ? "judge" : "predictor"},
      {"backend",
       {
           {"kind", b.kind == BackendKind::scripted ? "scripted" : "openai"},
           {"model_id", b.model_id},
           {"evaluator_temperature", b.evaluator_temperature},
           {"optimizer_temperature", b.optimizer_temperature},
           {"max_output_tokens", b.max_output_tokens},
           {"retry_count", b.retry_count},
           {"cache", b.cache},
           {"seed", b.seed ? json(*b.seed) : json(nullptr)},
       }},
  };
}

}  // namespace lexanon
