#include "lexanon/metrics.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "lexanon/error.hpp"

namespace lexanon {

UtilityMetrics utility_metrics(const std::vector<std::string>& gold,
                               const std::vector<std::string>& predicted,
                               const std::vector<ClassProbs>* probs) {
  if (gold.size() != predicted.size()) {
    throw PreconditionError("gold and predicted label counts differ");
  }
  if (gold.empty()) throw PreconditionError("metrics over zero items");
  if (probs && probs->size() != gold.size()) {
    throw PreconditionError("probability rows do not match the item count");
  }

  std::set<std::string> labels(gold.begin(), gold.end());
  labels.insert(predicted.begin(), predicted.end());

  UtilityMetrics m;
  std::map<std::string, int> true_pos;
  int correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    ++m.per_class[gold[i]].support;
    ++m.per_class[predicted[i]].predicted;
    if (gold[i] == predicted[i]) {
      ++correct;
      ++true_pos[gold[i]];
    }
  }

  double sum_p = 0.0, sum_r = 0.0, sum_f = 0.0;
  for (const auto& label : labels) {
    auto& c = m.per_class[label];
    const double tp = true_pos[label];
    c.precision = c.predicted > 0 ? tp / c.predicted : 0.0;
    c.recall = c.support > 0 ? tp / c.support : 0.0;
    c.f1 = (c.precision + c.recall) > 0 ? 2 * c.precision * c.recall / (c.precision + c.recall) : 0.0;
    if (c.predicted == 0) m.zero_prediction_classes.push_back(label);
    sum_p += c.precision;
    sum_r += c.recall;
    sum_f += c.f1;
  }
  const double k = static_cast<double>(labels.size());
  m.accuracy = 100.0 * correct / static_cast<double>(gold.size());
  m.macro_precision = 100.0 * sum_p / k;
  m.macro_recall = 100.0 * sum_r / k;
  m.macro_f1 = 100.0 * sum_f / k;

  if (probs) {
    double loss = 0.0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      const auto& row = (*probs)[i];
      double total = 0.0;
      for (const auto& [label, p] : row) {
        if (!(p >= 0.0)) throw PreconditionError("negative or NaN probability");
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-6) {
        throw PreconditionError("probability row " + std::to_string(i) + " is not normalized");
      }
      auto it = row.find(gold[i]);
      const double p = it == row.end() ? 0.0 : it->second;
      if (p <= 0.0) throw PreconditionError("zero probability on the gold label of item " +
                                            std::to_string(i));
      loss -= std::log(p);
    }
    m.mean_loss = loss / static_cast<double>(gold.size());
  }
  return m;
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read predictions " + path.string());
  std::vector<Prediction> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Prediction p;
      p.record_id = j.at("record_id").get<std::string>();
      p.predicted_label = j.at("predicted_label").get<std::string>();
      if (j.contains("probs") && !j.at("probs").is_null()) {
        p.probs = j.at("probs").get<ClassProbs>();
      }
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw CorpusError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace lexanon
