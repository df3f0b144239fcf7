#include "convmamba/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "convmamba/error.hpp"

namespace convmamba {
namespace {

void CheckLabels(std::span<const int> labels, std::size_t n_scores) {
  if (labels.empty()) Fail(ErrorKind::kMetrics, "metrics of an empty set");
  if (labels.size() != n_scores) Fail(ErrorKind::kMetrics, "labels and scores differ in length");
  for (int l : labels) {
    if (l != 0 && l != 1) Fail(ErrorKind::kMetrics, "labels must be 0 or 1");
  }
}

double SafeDiv(double num, double den, bool& flag) {
  if (den == 0.0) {
    flag = true;
    return 0.0;
  }
  return num / den;
}

}  // namespace

double MannWhitneyAuc(std::span<const int> labels, std::span<const double> scores) {
  CheckLabels(labels, scores.size());
  const std::size_t n = labels.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // Ranks i+1 .. j share the midrank.
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        rank_sum_pos += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) Fail(ErrorKind::kMetrics, "AUC needs both classes");
  const double np = static_cast<double>(n_pos);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

std::vector<RocPoint> RocPoints(std::span<const int> labels, std::span<const double> scores) {
  CheckLabels(labels, scores.size());
  const std::size_t n = labels.size();
  const auto n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) Fail(ErrorKind::kMetrics, "ROC needs both classes");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<RocPoint> roc{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < n;) {
    const double threshold = scores[order[i]];
    while (i < n && scores[order[i]] == threshold) {
      (labels[order[i]] == 1 ? tp : fp) += 1;
      ++i;
    }
    roc.push_back({threshold, static_cast<double>(fp) / static_cast<double>(n_neg),
                   static_cast<double>(tp) / static_cast<double>(n_pos)});
  }
  return roc;
}

double TrapezoidArea(const std::vector<RocPoint>& roc) {
  double area = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i) {
    area += (roc[i].fpr - roc[i - 1].fpr) * (roc[i].tpr + roc[i - 1].tpr) / 2.0;
  }
  return area;
}

MetricsReport ComputeMetrics(std::span<const int> labels, std::span<const int> predictions,
                             std::span<const double> scores) {
  CheckLabels(labels, scores.size());
  if (predictions.size() != labels.size()) {
    Fail(ErrorKind::kMetrics, "labels and predictions differ in length");
  }
  MetricsReport r;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int p = predictions[i];
    if (p != 0 && p != 1) Fail(ErrorKind::kMetrics, "predictions must be 0 or 1");
    r.confusion[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(p)] += 1;
  }
  const double n = static_cast<double>(labels.size());
  for (std::size_t c = 0; c < 2; ++c) {
    const double hit = static_cast<double>(r.confusion[c][c]);
    const double predicted = static_cast<double>(r.confusion[0][c] + r.confusion[1][c]);
    const double actual = static_cast<double>(r.confusion[c][0] + r.confusion[c][1]);
    ClassMetrics& m = r.per_class[c];
    m.support = r.confusion[c][0] + r.confusion[c][1];
    m.precision = SafeDiv(hit, predicted, r.zero_division);
    m.recall = SafeDiv(hit, actual, r.zero_division);
    m.f1 = SafeDiv(2.0 * m.precision * m.recall, m.precision + m.recall, r.zero_division);
    r.weighted_f1 += static_cast<double>(m.support) * m.f1 / n;
  }
  r.accuracy = static_cast<double>(r.tn() + r.tp()) / n;
  if (r.per_class[0].support > 0 && r.per_class[1].support > 0) {
    r.auc = MannWhitneyAuc(labels, scores);
    r.roc = RocPoints(labels, scores);
  }
  return r;
}

std::string MetricsJson(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["n"] = r.total();
  j["confusion_matrix"] = {{r.tn(), r.fp()}, {r.fn(), r.tp()}};
  j["accuracy"] = r.accuracy;
  j["auc"] = r.auc;
  j["weighted_f1"] = r.weighted_f1;
  for (std::size_t c = 0; c < 2; ++c) {
    const auto& m = r.per_class[c];
    j["per_class"][c == 0 ? "non_seizure" : "seizure"] = {
        {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}};
  }
  j["zero_division"] = r.zero_division;
  return j.dump(2) + "\n";
}

std::string RocCsv(const std::vector<RocPoint>& roc) {
  std::ostringstream out;
  out.precision(17);
  out << "threshold,fpr,tpr\n";
  for (const auto& p : roc) {
    if (std::isinf(p.threshold)) {
      out << "inf";
    } else {
      out << p.threshold;
    }
    out << ',' << p.fpr << ',' << p.tpr << '\n';
  }
  return out.str();
}

}  // namespace convmamba
