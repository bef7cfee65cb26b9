#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lexanon/core.hpp"

namespace lexanon {

using Bindings = std::map<std::string, std::string, std::less<>>;

/// A prompt body with `{placeholder}` slots. `{{` and `}}` are literal braces.
class PromptTemplate {
 public:
  /// Throws TemplateError if the body is malformed or names a placeholder twice.
  PromptTemplate(PromptName name, std::string profile, std::string version, std::string body);

  PromptName name() const { return name_; }
  const std::string& profile() const { return profile_; }
  const std::string& version() const { return version_; }
  const std::string& body() const { return body_; }
  /// Placeholder names in order of appearance.
  const std::vector<std::string>& placeholders() const { return placeholders_; }

 private:
  PromptName name_;
  std::string profile_;
  std::string version_;
  std::string body_;
  std::vector<std::string> placeholders_;
};

/// Substitutes every placeholder. Missing or unknown bindings throw
/// TemplateError naming the placeholder.
std::string render(const PromptTemplate& tmpl, const Bindings& bindings);

/// Read-only set of templates keyed by (name, profile, version).
///
/// On disk a registry is a directory holding `manifest.json` (an array of
/// {name, profile, version, file}) plus the referenced UTF-8 body files.
class PromptRegistry {
 public:
  static PromptRegistry load(const std::filesystem::path& dir);
  /// Directory of the templates installed with the library.
  static std::filesystem::path bundled_dir();

  void add(PromptTemplate tmpl, std::string file);

  /// Highest version for (name, profile). Throws TemplateError when absent.
  const PromptTemplate& get(PromptName name, std::string_view profile) const;
  const PromptTemplate& get(PromptName name, std::string_view profile,
                            std::string_view version) const;

  /// Writes the manifest and every body file byte-for-byte.
  void dump(const std::filesystem::path& dir) const;

  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    PromptTemplate tmpl;
    std::string file;
  };
  std::vector<Entry> entries_;
};

/// Numbered blocks for the most recent `limit` entries, oldest first, each
/// showing scores as "privacy: p/K+1, utility: u/u_scale" and the text.
std::string serialize_memory(std::span<const MemoryEntry> entries, int limit,
                             ObjectiveBounds bounds);

/// Orders dotted version strings numerically ("1.10" > "1.9").
int compare_versions(std::string_view a, std::string_view b);

}  // namespace lexanon
