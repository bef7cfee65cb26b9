#include "lexanon/corpus.hpp"

#include <fstream>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "lexanon/error.hpp"

namespace lexanon {

using nlohmann::json;

namespace {

std::string required_string(const json& j, const char* key, int line_no) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw CorpusError("corpus line " + std::to_string(line_no) + ": missing string field '" +
                      key + "'");
  }
  return j.at(key).get<std::string>();
}

}  // namespace

std::vector<Record> read_corpus(std::istream& in) {
  std::vector<Record> records;
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw CorpusError("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_object()) {
      throw CorpusError("corpus line " + std::to_string(line_no) + ": expected an object");
    }
    Record r;
    r.id = required_string(j, "id", line_no);
    r.original_text = required_string(j, "text", line_no);
    r.identity = required_string(j, "identity", line_no);
    r.task_label = required_string(j, "label", line_no);
    if (j.contains("attribute_kind") && !j.at("attribute_kind").is_null()) {
      r.attribute_kind = attribute_kind_from_string(j.at("attribute_kind").get<std::string>());
    }
    r.validate();
    if (!seen.insert(r.id).second) {
      throw CorpusError("corpus line " + std::to_string(line_no) + ": duplicate id '" + r.id +
                        "'");
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<Record> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot read corpus " + path.string());
  return read_corpus(in);
}

}  // namespace lexanon
