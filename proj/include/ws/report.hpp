#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ws/activity.hpp"
#include "ws/counting.hpp"
#include "ws/metrics.hpp"
#include "ws/train.hpp"

namespace ws::report {

// Human-facing tables (CSV/SVG) use 6 significant digits; report.json keeps
// full precision.
inline std::string sig6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline std::vector<std::string> activity_class_names() {
  std::vector<std::string> names;
  names.reserve(kNumActivities);
  for (const ActivityLabel l : kAllActivities) names.emplace_back(label_name(l));
  return names;
}

inline std::vector<std::string> subject_class_names(int n) {
  std::vector<std::string> names;
  names.reserve(n);
  for (int i = 1; i <= n; ++i) names.push_back("S" + std::to_string(i));
  return names;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

inline nlohmann::ordered_json metrics_to_json(const eval::Metrics& m,
                                              const std::vector<std::string>& class_names) {
  if (static_cast<int>(class_names.size()) != m.n_classes) {
    throw std::invalid_argument("metrics_to_json: class name count mismatch");
  }
  nlohmann::ordered_json j;
  j["accuracy"] = m.accuracy;
  j["macro_f1"] = m.macro_f1;
  j["correct"] = m.correct;
  j["total"] = m.total;
  nlohmann::ordered_json per_class = nlohmann::ordered_json::array();
  for (int c = 0; c < m.n_classes; ++c) {
    per_class.push_back({{"class", class_names[c]},
                         {"support", m.support[c]},
                         {"precision", m.precision[c]},
                         {"recall", m.recall[c]},
                         {"f1", m.f1[c]}});
  }
  j["per_class"] = per_class;
  j["confusion_row_normalized"] = m.confusion;
  j["confusion_counts"] = m.confusion_counts;
  return j;
}

inline nlohmann::ordered_json eval_report_to_json(const eval::EvalReport& rep,
                                                  const std::vector<std::string>& class_names) {
  nlohmann::ordered_json j;
  j["aggregate"] = metrics_to_json(rep.aggregate, class_names);
  j["fold_mean_accuracy"] = rep.fold_mean_accuracy;
  nlohmann::ordered_json folds = nlohmann::ordered_json::array();
  for (const auto& f : rep.folds) {
    folds.push_back({{"held_out", f.held_out},
                     {"accuracy", f.metrics.accuracy},
                     {"macro_f1", f.metrics.macro_f1},
                     {"test_windows", f.metrics.total},
                     {"epochs_run", f.epochs_run},
                     {"best_epoch", f.best_epoch},
                     {"best_val_loss", f.best_val_loss},
                     {"final_lr", f.final_lr}});
  }
  j["folds"] = folds;
  return j;
}

// Row-normalized confusion matrix as CSV: first column true class, remaining
// columns predicted classes.
inline std::string confusion_csv(const eval::Metrics& m,
                                 const std::vector<std::string>& class_names) {
  std::string csv = "true_class";
  for (const auto& n : class_names) csv += "," + n;
  csv += "\n";
  for (int r = 0; r < m.n_classes; ++r) {
    csv += class_names[r];
    for (int c = 0; c < m.n_classes; ++c) csv += "," + sig6(m.confusion[r][c]);
    csv += "\n";
  }
  return csv;
}

namespace detail {

inline std::string heat_color(double v) {
  // White → deep blue ramp.
  const double t = std::min(std::max(v, 0.0), 1.0);
  const int r = static_cast<int>(247 + t * (8 - 247));
  const int g = static_cast<int>(251 + t * (48 - 251));
  const int b = static_cast<int>(255 + t * (107 - 255));
  char buf[16];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (const char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += ch;
    }
  }
  return out;
}

}  // namespace detail

inline std::string confusion_svg(const eval::Metrics& m, const std::vector<std::string>& class_names,
                                 const std::string& title) {
  const int n = m.n_classes;
  const int cell = 34;
  const int left = 120, top = 90, pad = 12;
  const int width = left + n * cell + pad;
  const int height = top + n * cell + 30;
  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
         "\" height=\"" + std::to_string(height) + "\" font-family=\"monospace\" font-size=\"11\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + std::to_string(left) + "\" y=\"18\" font-size=\"14\">" +
         detail::svg_escape(title) + "</text>\n";
  for (int c = 0; c < n; ++c) {
    const int x = left + c * cell + cell / 2;
    svg += "<text x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(top - 6) +
           "\" text-anchor=\"start\" transform=\"rotate(-45 " + std::to_string(x) + " " +
           std::to_string(top - 6) + ")\">" + detail::svg_escape(class_names[c]) + "</text>\n";
  }
  for (int r = 0; r < n; ++r) {
    const int y = top + r * cell + cell / 2 + 4;
    svg += "<text x=\"" + std::to_string(left - 6) + "\" y=\"" + std::to_string(y) +
           "\" text-anchor=\"end\">" + detail::svg_escape(class_names[r]) + "</text>\n";
    for (int c = 0; c < n; ++c) {
      const double v = m.confusion[r][c];
      const int x = left + c * cell;
      const int yy = top + r * cell;
      svg += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(yy) + "\" width=\"" +
             std::to_string(cell) + "\" height=\"" + std::to_string(cell) + "\" fill=\"" +
             detail::heat_color(v) + "\" stroke=\"#cccccc\"/>\n";
      if (v >= 0.005) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%.2f", v);
        svg += "<text x=\"" + std::to_string(x + cell / 2) + "\" y=\"" + std::to_string(yy + cell / 2 + 4) +
               "\" text-anchor=\"middle\" fill=\"" + (v > 0.55 ? std::string("white") : std::string("black")) +
               "\">" + buf + "</text>\n";
      }
    }
  }
  svg += "</svg>\n";
  return svg;
}

// Per-segment counting detail, one row per segment with every source and
// fusion column.
inline std::string counting_detail_csv(const std::vector<counting::CountResult>& results) {
  std::string csv =
      "subject,day,position,activity,true_count,acc,gyro,hbc,imu,combined,"
      "acc_accuracy,gyro_accuracy,hbc_accuracy,imu_accuracy,combined_accuracy\n";
  for (const auto& r : results) {
    csv += std::to_string(r.subject_id) + "," + std::to_string(r.day) + "," +
           std::string(position_token(r.position)) + "," + std::string(label_name(r.activity)) +
           "," + std::to_string(r.true_count) + "," + std::to_string(r.acc) + "," +
           std::to_string(r.gyro) + "," + std::to_string(r.hbc) + "," + sig6(r.imu) + "," +
           sig6(r.combined) + "," + sig6(r.acc_accuracy) + "," + sig6(r.gyro_accuracy) + "," +
           sig6(r.hbc_accuracy) + "," + sig6(r.imu_accuracy) + "," + sig6(r.combined_accuracy) +
           "\n";
  }
  return csv;
}

// Long-format rows for box plots: one row per (segment, source).
inline std::string counting_boxplot_csv(const std::vector<counting::CountResult>& results) {
  std::string csv = "activity,source,accuracy\n";
  for (const auto& r : results) {
    const std::string act(label_name(r.activity));
    csv += act + ",acc," + sig6(r.acc_accuracy) + "\n";
    csv += act + ",gyro," + sig6(r.gyro_accuracy) + "\n";
    csv += act + ",hbc," + sig6(r.hbc_accuracy) + "\n";
    csv += act + ",imu," + sig6(r.imu_accuracy) + "\n";
    csv += act + ",combined," + sig6(r.combined_accuracy) + "\n";
  }
  return csv;
}

// Per-exercise mean accuracy table plus an `all` summary row.
inline std::string counting_summary_csv(const std::vector<counting::CountResult>& results) {
  struct Acc {
    double acc = 0, gyro = 0, hbc = 0, imu = 0, combined = 0;
    int n = 0;
  };
  std::map<std::string, Acc> by_activity;
  Acc overall;
  for (const auto& r : results) {
    for (Acc* a : {&by_activity[std::string(label_name(r.activity))], &overall}) {
      a->acc += r.acc_accuracy;
      a->gyro += r.gyro_accuracy;
      a->hbc += r.hbc_accuracy;
      a->imu += r.imu_accuracy;
      a->combined += r.combined_accuracy;
      a->n += 1;
    }
  }
  std::string csv = "activity,segments,acc,gyro,hbc,imu,combined\n";
  auto row = [&](const std::string& name, const Acc& a) {
    csv += name + "," + std::to_string(a.n) + "," + sig6(a.acc / a.n) + "," + sig6(a.gyro / a.n) +
           "," + sig6(a.hbc / a.n) + "," + sig6(a.imu / a.n) + "," + sig6(a.combined / a.n) + "\n";
  };
  for (const auto& [name, a] : by_activity) row(name, a);
  if (overall.n > 0) row("all", overall);
  return csv;
}

inline nlohmann::ordered_json counting_results_to_json(
    const std::vector<counting::CountResult>& results) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    arr.push_back({{"subject", r.subject_id},
                   {"day", r.day},
                   {"position", std::string(position_token(r.position))},
                   {"activity", std::string(label_name(r.activity))},
                   {"true_count", r.true_count},
                   {"acc", r.acc},
                   {"gyro", r.gyro},
                   {"hbc", r.hbc},
                   {"imu", r.imu},
                   {"combined", r.combined},
                   {"acc_accuracy", r.acc_accuracy},
                   {"gyro_accuracy", r.gyro_accuracy},
                   {"hbc_accuracy", r.hbc_accuracy},
                   {"imu_accuracy", r.imu_accuracy},
                   {"combined_accuracy", r.combined_accuracy}});
  }
  return arr;
}

}  // namespace ws::report
