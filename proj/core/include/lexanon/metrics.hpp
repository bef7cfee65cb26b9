#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lexanon {

using ClassProbs = std::map<std::string, double>;

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int support = 0;
  int predicted = 0;
};

/// Percentages, except mean_loss which is in nats.
struct UtilityMetrics {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::optional<double> mean_loss;
  std::map<std::string, ClassScores> per_class;
  std::vector<std::string> zero_prediction_classes;
};

/// Macro averages over the union of gold and predicted labels. A class never
/// predicted contributes precision 0. `probs`, when given, must hold one
/// row-normalized distribution per item; the loss is the mean negative log
/// probability of the gold label.
UtilityMetrics utility_metrics(const std::vector<std::string>& gold,
                               const std::vector<std::string>& predicted,
                               const std::vector<ClassProbs>* probs = nullptr);

struct Prediction {
  std::string record_id;
  std::string predicted_label;
  std::optional<ClassProbs> probs;
};

/// JSON-lines of {record_id, predicted_label, probs?}.
std::vector<Prediction> load_predictions(const std::filesystem::path& path);

}  // namespace lexanon
