#include "lexanon/pipeline.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <thread>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "lexanon/corpus.hpp"
#include "lexanon/error.hpp"
#include "lexanon/http_backend.hpp"
#include "lexanon/optimizer.hpp"

namespace lexanon {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return (v && *v) ? std::string(v) : std::move(fallback);
}

}  // namespace

RunContext make_run_context(const RunConfig& config) {
  config.validate();
  RunContext ctx;
  ctx.config = config;

  const auto template_dir =
      config.template_dir.empty() ? PromptRegistry::bundled_dir() : config.template_dir;
  ctx.registry = std::make_shared<const PromptRegistry>(PromptRegistry::load(template_dir));

  std::shared_ptr<ChatBackend> backend;
  auto& be = ctx.config.backend;
  if (be.kind == BackendKind::scripted) {
    if (be.script_path.empty()) throw ConfigError("scripted backend requires backend.script");
    backend = ScriptedBackend::from_file(be.script_path);
  } else {
    HttpBackendOptions http;
    http.base_url = be.endpoint.empty() ? env_or("LEXANON_API_BASE", "https://api.openai.com/v1")
                                        : be.endpoint;
    http.api_key = env_or(be.api_key_env.c_str(), "");
    if (http.api_key.empty()) {
      throw ConfigError("environment variable " + be.api_key_env + " holds no API key");
    }
    http.timeout_seconds = be.timeout_seconds;
    be.model_id = env_or("LEXANON_MODEL", be.model_id);
    backend = std::make_shared<HttpBackend>(std::move(http));
  }

  GatewayOptions options;
  options.retry_count = be.retry_count;
  options.initial_backoff = std::chrono::milliseconds(be.initial_backoff_ms);
  options.backoff_factor = be.backoff_factor;
  options.cache = be.cache;
  options.requests_per_minute = be.requests_per_minute;
  ctx.gateway = std::make_shared<Gateway>(std::move(backend), options);

  if (ctx.config.utility_mode == UtilityMode::predictor) {
    ctx.utility = std::make_shared<TableUtilityEvaluator>(
        PredictionTable::load(ctx.config.prediction_table), ctx.config);
  } else {
    ctx.utility =
        std::make_shared<JudgeUtilityEvaluator>(*ctx.gateway, *ctx.registry, ctx.config);
  }
  return ctx;
}

CorpusSummary run_corpus(const fs::path& corpus_path, const RunContext& ctx,
                         const fs::path& out_dir, CorpusOptions options) {
  const auto records = load_corpus(corpus_path);
  const RunLayout layout{out_dir};
  std::error_code ec;
  fs::create_directories(layout.traces(), ec);
  if (ec) throw Error("cannot create " + layout.traces().string() + ": " + ec.message());

  CorpusSummary summary;
  summary.records = static_cast<int>(records.size());
  std::vector<std::optional<OptimizationTrace>> results(records.size());
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto path = layout.traces() / trace_file_name(records[i].id);
    if (options.resume && fs::exists(path)) {
      try {
        auto trace = read_trace(path);
        if (trace.sealed && trace.record_id == records[i].id) {
          results[i] = std::move(trace);
          ++summary.skipped;
          continue;
        }
      } catch (const Error& e) {
        spdlog::warn("re-running '{}': unreadable trace ({})", records[i].id, e.what());
      }
    }
    pending.push_back(i);
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    const Optimizer optimizer(*ctx.gateway, *ctx.registry, ctx.config, *ctx.utility);
    for (std::size_t slot = next++; slot < pending.size(); slot = next++) {
      const auto i = pending[slot];
      const auto& record = records[i];
      try {
        auto outcome = optimizer.run_record(record);
        write_trace(layout.traces() / trace_file_name(record.id), outcome.trace);
        results[i] = std::move(outcome.trace);
      } catch (const std::exception& e) {
        spdlog::error("record '{}' failed: {}", record.id, e.what());
      }
    }
  };
  const int workers = std::max(1, std::min<int>(options.workers, static_cast<int>(pending.size())));
  {
    std::vector<std::jthread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
  }

  std::ofstream out(layout.anonymized(), std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + layout.anonymized().string());
  double p_sum = 0;
  double u_sum = 0;
  int finals = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!results[i]) {
      ++summary.errored;
      continue;
    }
    const auto& trace = *results[i];
    if (trace.stop_reason == StopReason::evaluation_error) {
      ++summary.errored;
    } else {
      ++summary.completed;
    }
    const auto& final_entry = trace.final_entry();
    ordered_json line{{"id", trace.record_id},
                      {"text", final_entry.text},
                      {"p", final_entry.p},
                      {"u", final_entry.u},
                      {"stop_reason", to_string(trace.stop_reason)}};
    out << line.dump() << '\n';
    p_sum += final_entry.p;
    u_sum += final_entry.u;
    ++finals;
  }
  if (finals > 0) {
    summary.mean_p = p_sum / finals;
    summary.mean_u = u_sum / finals;
  }
  return summary;
}

std::vector<AnonymizedRow> load_anonymized(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<AnonymizedRow> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      rows.push_back({j.at("id").get<std::string>(), j.at("text").get<std::string>(),
                      j.value("p", 0), j.value("u", 0), j.value("stop_reason", std::string{})});
    } catch (const json::exception& e) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

std::vector<CurvePoint> iteration_curves(const std::vector<OptimizationTrace>& traces) {
  std::map<int, CurvePoint> by_iteration;
  for (const auto& trace : traces) {
    for (const auto& e : trace.entries) {
      auto& point = by_iteration[e.iteration];
      point.iteration = e.iteration;
      ++point.records;
      point.mean_p += e.p;
      point.mean_u += e.u;
    }
  }
  std::vector<CurvePoint> curve;
  for (auto& [_, point] : by_iteration) {
    point.mean_p /= point.records;
    point.mean_u /= point.records;
    curve.push_back(point);
  }
  return curve;
}

std::vector<CurvePoint> iteration_curves(const fs::path& trace_dir) {
  return iteration_curves(read_trace_dir(trace_dir));
}

void write_curves_tsv(std::ostream& out, const std::vector<CurvePoint>& curve) {
  out << "iteration\trecords\tmean_p\tmean_u\n";
  for (const auto& point : curve) {
    out << point.iteration << '\t' << point.records << '\t' << std::fixed << std::setprecision(4)
        << point.mean_p << '\t' << point.mean_u << '\n';
  }
  out.unsetf(std::ios::fixed);
}

}  // namespace lexanon
