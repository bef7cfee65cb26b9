#include "lexanon/prompt_registry.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lexanon/error.hpp"

#ifndef LEXANON_SOURCE_TEMPLATE_DIR
#define LEXANON_SOURCE_TEMPLATE_DIR ""
#endif
#ifndef LEXANON_INSTALL_TEMPLATE_DIR
#define LEXANON_INSTALL_TEMPLATE_DIR ""
#endif

namespace lexanon {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool is_ident(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

// A parsed body: literal runs alternate with placeholder names.
struct Piece {
  bool placeholder = false;
  std::string value;
};

std::vector<Piece> parse_body(std::string_view body) {
  std::vector<Piece> pieces;
  std::string literal;
  auto flush = [&] {
    if (!literal.empty()) pieces.push_back({false, std::move(literal)});
    literal.clear();
  };
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    if (c == '{') {
      if (i + 1 < body.size() && body[i + 1] == '{') {
        literal.push_back('{');
        ++i;
        continue;
      }
      std::size_t j = i + 1;
      if (j < body.size() && is_ident_start(body[j])) {
        while (j < body.size() && is_ident(body[j])) ++j;
      }
      if (j == i + 1 || j >= body.size() || body[j] != '}') {
        throw TemplateError("malformed placeholder at offset " + std::to_string(i) +
                            " (use {{ for a literal brace)");
      }
      flush();
      pieces.push_back({true, std::string(body.substr(i + 1, j - i - 1))});
      i = j;
    } else if (c == '}') {
      if (i + 1 < body.size() && body[i + 1] == '}') {
        literal.push_back('}');
        ++i;
        continue;
      }
      throw TemplateError("stray '}' at offset " + std::to_string(i));
    } else {
      literal.push_back(c);
    }
  }
  flush();
  return pieces;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TemplateError("cannot read template file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

PromptTemplate::PromptTemplate(PromptName name, std::string profile, std::string version,
                               std::string body)
    : name_(name), profile_(std::move(profile)), version_(std::move(version)), body_(std::move(body)) {
  std::set<std::string, std::less<>> seen;
  for (auto& piece : parse_body(body_)) {
    if (!piece.placeholder) continue;
    if (!seen.insert(piece.value).second) {
      throw TemplateError("template " + std::string(to_string(name_)) + "/" + profile_ +
                          ": placeholder {" + piece.value + "} appears more than once");
    }
    placeholders_.push_back(piece.value);
  }
}

std::string render(const PromptTemplate& tmpl, const Bindings& bindings) {
  for (const auto& [key, _] : bindings) {
    if (std::find(tmpl.placeholders().begin(), tmpl.placeholders().end(), key) ==
        tmpl.placeholders().end()) {
      throw TemplateError("unknown placeholder {" + key + "} for template " +
                          std::string(to_string(tmpl.name())));
    }
  }
  std::string out;
  out.reserve(tmpl.body().size());
  for (const auto& piece : parse_body(tmpl.body())) {
    if (!piece.placeholder) {
      out += piece.value;
      continue;
    }
    auto it = bindings.find(piece.value);
    if (it == bindings.end()) {
      throw TemplateError("unbound placeholder {" + piece.value + "} in template " +
                          std::string(to_string(tmpl.name())));
    }
    out += it->second;
  }
  return out;
}

int compare_versions(std::string_view a, std::string_view b) {
  auto next = [](std::string_view& s) {
    auto dot = s.find('.');
    auto part = s.substr(0, dot);
    s = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
    return part;
  };
  while (!a.empty() || !b.empty()) {
    auto pa = next(a);
    auto pb = next(b);
    const bool na = !pa.empty() && std::all_of(pa.begin(), pa.end(), ::isdigit);
    const bool nb = !pb.empty() && std::all_of(pb.begin(), pb.end(), ::isdigit);
    if (na && nb) {
      auto ia = std::stoll(std::string(pa));
      auto ib = std::stoll(std::string(pb));
      if (ia != ib) return ia < ib ? -1 : 1;
    } else if (int c = pa.compare(pb); c != 0) {
      return c < 0 ? -1 : 1;
    }
  }
  return 0;
}

PromptRegistry PromptRegistry::load(const fs::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  json manifest;
  try {
    manifest = json::parse(read_file(manifest_path));
  } catch (const json::parse_error& e) {
    throw TemplateError(manifest_path.string() + ": " + e.what());
  }
  if (!manifest.contains("templates") || !manifest.at("templates").is_array()) {
    throw TemplateError(manifest_path.string() + ": expected a 'templates' array");
  }
  PromptRegistry reg;
  for (const auto& item : manifest.at("templates")) {
    try {
      const auto file = item.at("file").get<std::string>();
      reg.add(PromptTemplate(prompt_name_from_string(item.at("name").get<std::string>()),
                             item.at("profile").get<std::string>(),
                             item.at("version").get<std::string>(), read_file(dir / file)),
              file);
    } catch (const json::exception& e) {
      throw TemplateError(manifest_path.string() + ": " + e.what());
    }
  }
  return reg;
}

fs::path PromptRegistry::bundled_dir() {
  if (const char* env = std::getenv("LEXANON_TEMPLATE_DIR"); env && *env) return env;
  const fs::path installed(LEXANON_INSTALL_TEMPLATE_DIR);
  if (!installed.empty() && fs::exists(installed / "manifest.json")) return installed;
  return fs::path(LEXANON_SOURCE_TEMPLATE_DIR);
}

void PromptRegistry::add(PromptTemplate tmpl, std::string file) {
  for (const auto& e : entries_) {
    if (e.tmpl.name() == tmpl.name() && e.tmpl.profile() == tmpl.profile() &&
        e.tmpl.version() == tmpl.version()) {
      throw TemplateError("duplicate template " + std::string(to_string(tmpl.name())) + "/" +
                          tmpl.profile() + "@" + tmpl.version());
    }
  }
  entries_.push_back({std::move(tmpl), std::move(file)});
}

const PromptTemplate& PromptRegistry::get(PromptName name, std::string_view profile) const {
  const PromptTemplate* best = nullptr;
  for (const auto& e : entries_) {
    if (e.tmpl.name() != name || e.tmpl.profile() != profile) continue;
    if (!best || compare_versions(e.tmpl.version(), best->version()) > 0) best = &e.tmpl;
  }
  if (!best) {
    throw TemplateError("no template " + std::string(to_string(name)) + " for profile '" +
                        std::string(profile) + "'");
  }
  return *best;
}

const PromptTemplate& PromptRegistry::get(PromptName name, std::string_view profile,
                                          std::string_view version) const {
  for (const auto& e : entries_) {
    if (e.tmpl.name() == name && e.tmpl.profile() == profile && e.tmpl.version() == version) {
      return e.tmpl;
    }
  }
  throw TemplateError("no template " + std::string(to_string(name)) + "/" +
                      std::string(profile) + "@" + std::string(version));
}

void PromptRegistry::dump(const fs::path& dir) const {
  json items = json::array();
  for (const auto& e : entries_) {
    items.push_back({{"name", to_string(e.tmpl.name())},
                     {"profile", e.tmpl.profile()},
                     {"version", e.tmpl.version()},
                     {"file", e.file}});
    const auto path = dir / e.file;
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << e.tmpl.body();
    if (!out) throw TemplateError("cannot write " + path.string());
  }
  fs::create_directories(dir);
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  out << json{{"templates", items}}.dump(2) << '\n';
}

std::string serialize_memory(std::span<const MemoryEntry> entries, int limit,
                             ObjectiveBounds bounds) {
  if (limit < 1) throw PreconditionError("memory window must be >= 1");
  const auto n = entries.size();
  const auto start = n > static_cast<std::size_t>(limit) ? n - limit : 0;
  std::string out;
  for (std::size_t i = start; i < n; ++i) {
    const auto& e = entries[i];
    if (!out.empty()) out += "\n\n";
    out += "### Iteration " + std::to_string(e.iteration) + "\n";
    out += "privacy: " + std::to_string(e.objectives.privacy()) + "/" +
           std::to_string(bounds.privacy_max()) + ", utility: " +
           std::to_string(e.objectives.utility()) + "/" + std::to_string(bounds.u_scale) + "\n";
    out += e.text;
  }
  return out;
}

}  // namespace lexanon
