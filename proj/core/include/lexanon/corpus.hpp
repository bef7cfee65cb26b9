#pragma once

#include <filesystem>
#include <istream>
#include <vector>

#include "lexanon/core.hpp"

namespace lexanon {

/// Parses JSON-lines records with keys id, text, identity, label and an
/// optional attribute_kind. Blank lines are ignored. Throws CorpusError on
/// malformed lines, broken invariants, or duplicate ids.
std::vector<Record> read_corpus(std::istream& in);
std::vector<Record> load_corpus(const std::filesystem::path& path);

}  // namespace lexanon
