#include "lexanon/trace.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include <spdlog/spdlog.h>

#include "lexanon/error.hpp"

namespace lexanon {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(OptimizerMode mode) {
  return mode == OptimizerMode::privacy ? "privacy" : "utility";
}

std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::objectives_met:
      return "objectives_met";
    case StopReason::iteration_cap:
      return "iteration_cap";
    case StopReason::evaluation_error:
      return "evaluation_error";
  }
  return "iteration_cap";
}

OptimizerMode optimizer_mode_from_string(std::string_view s) {
  if (s == "privacy") return OptimizerMode::privacy;
  if (s == "utility") return OptimizerMode::utility;
  throw ProtocolError("unknown optimizer mode '" + std::string(s) + "'");
}

StopReason stop_reason_from_string(std::string_view s) {
  if (s == "objectives_met") return StopReason::objectives_met;
  if (s == "iteration_cap") return StopReason::iteration_cap;
  if (s == "evaluation_error") return StopReason::evaluation_error;
  throw ProtocolError("unknown stop reason '" + std::string(s) + "'");
}

int TraceEntry::prompt_tokens() const {
  int n = 0;
  for (const auto& c : calls) n += c.prompt_tokens;
  return n;
}

int TraceEntry::completion_tokens() const {
  int n = 0;
  for (const auto& c : calls) n += c.completion_tokens;
  return n;
}

std::int64_t OptimizationTrace::prompt_tokens() const {
  std::int64_t n = 0;
  for (const auto& e : entries) n += e.prompt_tokens();
  return n;
}

std::int64_t OptimizationTrace::completion_tokens() const {
  std::int64_t n = 0;
  for (const auto& e : entries) n += e.completion_tokens();
  return n;
}

std::int64_t OptimizationTrace::call_count() const {
  std::int64_t n = 0;
  for (const auto& e : entries) n += static_cast<std::int64_t>(e.calls.size());
  return n;
}

json to_json(const OptimizationTrace& t) {
  json entries = json::array();
  json latencies = json::array();
  for (const auto& e : t.entries) {
    json calls = json::array();
    json entry_latency = json::array();
    for (const auto& c : e.calls) {
      calls.push_back({{"tag", to_string(c.tag)},
                       {"prompt", c.prompt},
                       {"reply", c.reply},
                       {"prompt_tokens", c.prompt_tokens},
                       {"completion_tokens", c.completion_tokens},
                       {"cached", c.cached},
                       {"followup", c.followup}});
      entry_latency.push_back(c.latency_ms);
    }
    latencies.push_back(std::move(entry_latency));
    entries.push_back({
        {"iteration", e.iteration},
        {"mode", e.mode ? json(to_string(*e.mode)) : json(nullptr)},
        {"text", e.text},
        {"p", e.p},
        {"u", e.u},
        {"guesses", e.guesses},
        {"clues", e.clues},
        {"matched_rank", e.matched_rank ? json(*e.matched_rank) : json(nullptr)},
        {"errors", e.errors},
        {"calls", std::move(calls)},
        {"prompt_tokens", e.prompt_tokens()},
        {"completion_tokens", e.completion_tokens()},
    });
  }
  json j{
      {"schema_version", kTraceSchemaVersion},
      {"record_id", t.record_id},
      {"sealed", t.sealed},
      {"config", t.config},
      {"entries", std::move(entries)},
      {"stop_reason", to_string(t.stop_reason)},
      {"error", t.error ? json(*t.error) : json(nullptr)},
      {"final_iteration", t.final_iteration},
      {"final_text", t.entries.empty() ? std::string{} : t.final_entry().text},
      {"totals",
       {{"calls", t.call_count()},
        {"prompt_tokens", t.prompt_tokens()},
        {"completion_tokens", t.completion_tokens()}}},
      {"timing", {{"wall_time_ms", t.wall_time_ms}, {"call_latency_ms", std::move(latencies)}}},
  };
  return j;
}

OptimizationTrace trace_from_json(const json& j) {
  try {
    if (j.at("schema_version").get<int>() != kTraceSchemaVersion) {
      throw ProtocolError("unsupported trace schema version " +
                          j.at("schema_version").dump());
    }
    OptimizationTrace t;
    t.record_id = j.at("record_id").get<std::string>();
    t.sealed = j.at("sealed").get<bool>();
    t.config = j.at("config");
    t.stop_reason = stop_reason_from_string(j.at("stop_reason").get<std::string>());
    if (!j.at("error").is_null()) t.error = j.at("error").get<std::string>();
    t.final_iteration = j.at("final_iteration").get<int>();
    const json* latencies = nullptr;
    if (j.contains("timing")) {
      t.wall_time_ms = j.at("timing").value("wall_time_ms", std::int64_t{0});
      if (j.at("timing").contains("call_latency_ms")) latencies = &j.at("timing").at("call_latency_ms");
    }
    std::size_t index = 0;
    for (const auto& je : j.at("entries")) {
      TraceEntry e;
      e.iteration = je.at("iteration").get<int>();
      if (!je.at("mode").is_null()) e.mode = optimizer_mode_from_string(je.at("mode").get<std::string>());
      e.text = je.at("text").get<std::string>();
      e.p = je.at("p").get<int>();
      e.u = je.at("u").get<int>();
      e.guesses = je.at("guesses").get<std::vector<std::string>>();
      e.clues = je.at("clues").get<std::string>();
      if (!je.at("matched_rank").is_null()) e.matched_rank = je.at("matched_rank").get<int>();
      e.errors = je.at("errors").get<std::vector<std::string>>();
      std::size_t call_index = 0;
      for (const auto& jc : je.at("calls")) {
        CallRecord c;
        c.tag = prompt_name_from_string(jc.at("tag").get<std::string>());
        c.prompt = jc.at("prompt").get<std::string>();
        c.reply = jc.at("reply").get<std::string>();
        c.prompt_tokens = jc.at("prompt_tokens").get<int>();
        c.completion_tokens = jc.at("completion_tokens").get<int>();
        c.cached = jc.at("cached").get<bool>();
        c.followup = jc.value("followup", false);
        if (latencies && index < latencies->size() && call_index < (*latencies)[index].size()) {
          c.latency_ms = (*latencies)[index][call_index].get<std::int64_t>();
        }
        e.calls.push_back(std::move(c));
        ++call_index;
      }
      t.entries.push_back(std::move(e));
      ++index;
    }
    if (t.entries.empty() || t.final_iteration < 0 ||
        t.final_iteration >= static_cast<int>(t.entries.size())) {
      throw ProtocolError("trace '" + t.record_id + "' has no valid final entry");
    }
    return t;
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed trace: ") + e.what());
  }
}

json canonicalize(json trace_json) {
  trace_json.erase("timing");
  return trace_json;
}

std::string trace_file_name(std::string_view record_id) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string name;
  for (unsigned char c : record_id) {
    const bool safe = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                      c == '.' || c == '_' || c == '-';
    if (safe && !(name.empty() && c == '.')) {
      name.push_back(static_cast<char>(c));
    } else {
      name.push_back('%');
      name.push_back(kHex[c >> 4]);
      name.push_back(kHex[c & 0xF]);
    }
  }
  return name + ".json";
}

void write_trace(const fs::path& path, const OptimizationTrace& trace) {
  fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << to_json(trace).dump(2) << '\n';
    if (!out) throw Error("cannot write trace " + tmp.string());
  }
  fs::rename(tmp, path);
}

OptimizationTrace read_trace(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read trace " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ProtocolError(path.string() + ": " + e.what());
  }
  return trace_from_json(j);
}

std::vector<OptimizationTrace> read_trace_dir(const fs::path& dir) {
  std::vector<OptimizationTrace> traces;
  if (!fs::is_directory(dir)) return traces;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    try {
      auto t = read_trace(f);
      if (t.sealed) traces.push_back(std::move(t));
    } catch (const Error& e) {
      spdlog::warn("skipping {}: {}", f.string(), e.what());
    }
  }
  std::sort(traces.begin(), traces.end(),
            [](const auto& a, const auto& b) { return a.record_id < b.record_id; });
  return traces;
}

}  // namespace lexanon
