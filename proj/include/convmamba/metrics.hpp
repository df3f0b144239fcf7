#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

namespace convmamba {

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct RocPoint {
  double threshold;  // +inf for the (0, 0) start point
  double fpr;
  double tpr;
};

struct MetricsReport {
  // [[TN, FP], [FN, TP]]
  std::array<std::array<std::size_t, 2>, 2> confusion{};
  std::array<ClassMetrics, 2> per_class{};
  double weighted_f1 = 0.0;
  double accuracy = 0.0;
  double auc = 0.0;
  std::vector<RocPoint> roc;
  // Set when a precision, recall or F1 had a zero denominator and was
  // reported as 0.
  bool zero_division = false;

  std::size_t tn() const { return confusion[0][0]; }
  std::size_t fp() const { return confusion[0][1]; }
  std::size_t fn() const { return confusion[1][0]; }
  std::size_t tp() const { return confusion[1][1]; }
  std::size_t total() const { return tn() + fp() + fn() + tp(); }
};

// Mann-Whitney AUC: P(score+ > score-) + 0.5 P(score+ == score-), computed
// from midranks.
double MannWhitneyAuc(std::span<const int> labels, std::span<const double> scores);

// ROC polyline over distinct thresholds in descending order, starting at
// (0, 0) and ending at (1, 1). Both classes must be present.
std::vector<RocPoint> RocPoints(std::span<const int> labels, std::span<const double> scores);
double TrapezoidArea(const std::vector<RocPoint>& roc);

// predictions are hard class decisions; scores are class-1 scores (any
// monotone transform of the probability gives the same AUC). ROC and AUC are
// left empty / zero when only one class is present.
MetricsReport ComputeMetrics(std::span<const int> labels, std::span<const int> predictions,
                             std::span<const double> scores);

std::string MetricsJson(const MetricsReport& report);
std::string RocCsv(const std::vector<RocPoint>& roc);

}  // namespace convmamba
