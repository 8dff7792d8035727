#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ws::eval {

// Classification metrics over integer class ids in [0, n_classes).
// Accuracy is window-pooled (micro); macro F1 averages per-class F1 over
// classes with nonzero support; the confusion matrix is row-normalized.
struct Metrics {
  int n_classes = 0;
  int64_t total = 0;
  int64_t correct = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<std::vector<int64_t>> confusion_counts;  // [true][pred]
  std::vector<std::vector<double>> confusion;          // row-normalized
  std::vector<int64_t> support;                        // per true class
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;
};

inline Metrics compute_metrics(const std::vector<int>& predictions, const std::vector<int>& labels,
                               int n_classes) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("compute_metrics: " + std::to_string(predictions.size()) +
                                " predictions vs " + std::to_string(labels.size()) + " labels");
  }
  if (predictions.empty()) throw std::invalid_argument("compute_metrics: empty input");
  if (n_classes < 1) throw std::invalid_argument("compute_metrics: n_classes must be positive");

  Metrics m;
  m.n_classes = n_classes;
  m.total = static_cast<int64_t>(labels.size());
  m.confusion_counts.assign(n_classes, std::vector<int64_t>(n_classes, 0));
  m.confusion.assign(n_classes, std::vector<double>(n_classes, 0.0));
  m.support.assign(n_classes, 0);
  m.precision.assign(n_classes, 0.0);
  m.recall.assign(n_classes, 0.0);
  m.f1.assign(n_classes, 0.0);

  for (size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i], p = predictions[i];
    if (y < 0 || y >= n_classes || p < 0 || p >= n_classes) {
      throw std::invalid_argument("compute_metrics: class id outside [0," +
                                  std::to_string(n_classes) + ") at sample " + std::to_string(i));
    }
    m.confusion_counts[y][p] += 1;
    m.support[y] += 1;
    if (y == p) m.correct += 1;
  }
  m.accuracy = static_cast<double>(m.correct) / static_cast<double>(m.total);

  std::vector<int64_t> predicted(n_classes, 0);
  for (int y = 0; y < n_classes; ++y) {
    for (int p = 0; p < n_classes; ++p) predicted[p] += m.confusion_counts[y][p];
  }
  double f1_sum = 0.0;
  int f1_classes = 0;
  for (int c = 0; c < n_classes; ++c) {
    const int64_t tp = m.confusion_counts[c][c];
    m.precision[c] = predicted[c] > 0 ? static_cast<double>(tp) / predicted[c] : 0.0;
    m.recall[c] = m.support[c] > 0 ? static_cast<double>(tp) / m.support[c] : 0.0;
    const double pr = m.precision[c] + m.recall[c];
    m.f1[c] = pr > 0.0 ? 2.0 * m.precision[c] * m.recall[c] / pr : 0.0;
    if (m.support[c] > 0) {
      f1_sum += m.f1[c];
      f1_classes += 1;
    }
    if (m.support[c] > 0) {
      for (int p = 0; p < n_classes; ++p) {
        m.confusion[c][p] = static_cast<double>(m.confusion_counts[c][p]) / m.support[c];
      }
    }
  }
  m.macro_f1 = f1_classes > 0 ? f1_sum / f1_classes : 0.0;
  return m;
}

}  // namespace ws::eval
