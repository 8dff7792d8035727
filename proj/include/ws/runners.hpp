#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ws/counting.hpp"
#include "ws/dataio.hpp"
#include "ws/report.hpp"
#include "ws/synth.hpp"
#include "ws/train.hpp"

namespace ws::cli {

using dataio::Source;

enum class GridMode { UpperBound, Louo };

inline std::string_view grid_mode_token(GridMode m) {
  return m == GridMode::UpperBound ? "upper-bound" : "louo";
}

inline GridMode parse_grid_mode(std::string_view t) {
  if (t == "upper-bound") return GridMode::UpperBound;
  if (t == "louo") return GridMode::Louo;
  throw std::invalid_argument("unknown grid mode '" + std::string(t) +
                              "' (expected upper-bound or louo)");
}

struct SynthCmd {
  std::string out;
  int subjects = 2;
  int days = 2;
  uint64_t seed = 1;
  Position position = Position::Wrist;
  double snr_db = 30.0;
  bool noiseless = false;
};

struct EvalCmd {
  std::string data;
  std::string out;
  std::optional<Position> position;
  std::vector<Source> sources = {Source::Hbc, Source::Imu, Source::Combined};
  uint64_t seed = 1;
  int epochs = 1000;
  int patience = 100;
  int batch = 256;
  double lr_initial = 1e-4;
};

struct CountCmd {
  std::string data;
  std::string out;
  std::optional<Position> position;
  GridMode grid_mode = GridMode::UpperBound;
};

struct AuthCmd {
  std::string data;
  std::string out;
  std::optional<Position> position;
  Source source = Source::Combined;
  ActivityLabel activity = ActivityLabel::Running;
  uint64_t seed = 1;
  int epochs = 1000;
  int patience = 100;
  int batch = 256;
  double lr_initial = 1e-4;
};

namespace detail {

inline void write_run_manifest(const std::filesystem::path& out_dir,
                               const std::vector<std::string>& argv,
                               const std::vector<std::string>& outputs) {
  nlohmann::ordered_json j;
  j["argv"] = argv;
  j["outputs"] = outputs;
  report::write_text_file(out_dir / "run_manifest.json", j.dump(2) + "\n");
}

inline eval::TrainSpec make_train_spec(uint64_t seed, int epochs, int patience, int batch,
                                       double lr_initial) {
  eval::TrainSpec spec;
  spec.max_epochs = epochs;
  spec.patience = std::min(patience, epochs > 1 ? epochs - 1 : 1);
  spec.batch_size = batch;
  spec.lr.initial = lr_initial;
  spec.seed = seed;
  return spec;
}

// Windows per position, in manifest order.
inline std::map<Position, std::vector<dataio::WindowInstance>> windows_by_position(
    const std::filesystem::path& data, std::optional<Position> position) {
  std::map<Position, std::vector<dataio::WindowInstance>> by_pos;
  for (const auto& rec : dataio::load_sessions(data, position)) {
    auto wins = dataio::window_session(rec);
    auto& dst = by_pos[rec.position];
    dst.insert(dst.end(), std::make_move_iterator(wins.begin()),
               std::make_move_iterator(wins.end()));
  }
  if (by_pos.empty()) throw std::invalid_argument("no sessions matched in " + data.string());
  return by_pos;
}

}  // namespace detail

inline std::filesystem::path run_synth(const SynthCmd& cmd) {
  if (cmd.subjects < 2) {
    throw std::invalid_argument("synth: need --subjects >= 2 (leave-one-user-out requires it)");
  }
  synth::SynthOptions opt;
  opt.position = cmd.position;
  opt.snr_db = cmd.noiseless ? std::nullopt : std::optional<double>(cmd.snr_db);
  const auto entries = synth::generate_dataset(cmd.out, cmd.subjects, cmd.days, cmd.seed, opt);

  std::vector<std::string> argv = {"synth",
                                   "--out",
                                   cmd.out,
                                   "--subjects",
                                   std::to_string(cmd.subjects),
                                   "--days",
                                   std::to_string(cmd.days),
                                   "--seed",
                                   std::to_string(cmd.seed),
                                   "--position",
                                   std::string(position_token(cmd.position))};
  if (cmd.noiseless) {
    argv.emplace_back("--noiseless");
  } else {
    argv.emplace_back("--snr");
    argv.emplace_back(report::sig6(cmd.snr_db));
  }
  std::vector<std::string> outputs;
  for (const auto& e : entries) {
    outputs.push_back(e.csv.filename().string());
    outputs.push_back(e.sidecar.filename().string());
    if (e.counts) outputs.push_back(e.counts->filename().string());
  }
  detail::write_run_manifest(cmd.out, argv, outputs);
  return cmd.out;
}

inline nlohmann::ordered_json run_eval(const EvalCmd& cmd) {
  if (cmd.sources.empty()) throw std::invalid_argument("eval: no signal sources selected");
  const std::filesystem::path out_dir(cmd.out);
  std::filesystem::create_directories(out_dir);
  const auto by_pos = detail::windows_by_position(cmd.data, cmd.position);
  const eval::TrainSpec spec =
      detail::make_train_spec(cmd.seed, cmd.epochs, cmd.patience, cmd.batch, cmd.lr_initial);
  const auto class_names = report::activity_class_names();

  nlohmann::ordered_json root;
  root["command"] = "eval";
  root["data"] = cmd.data;
  root["position_filter"] =
      cmd.position ? nlohmann::json(std::string(position_token(*cmd.position))) : nlohmann::json();
  root["seed"] = cmd.seed;
  root["train"] = {{"max_epochs", spec.max_epochs},
                   {"patience", spec.patience},
                   {"batch_size", spec.batch_size},
                   {"lr_initial", spec.lr.initial}};
  nlohmann::ordered_json configs = nlohmann::ordered_json::array();
  std::vector<std::string> outputs = {"report.json"};

  for (const auto& [pos, windows] : by_pos) {
    std::set<int> subjects;
    for (const auto& w : windows) subjects.insert(w.subject_id);
    for (const Source source : cmd.sources) {
      nn::ModelConfig cfg;
      cfg.source = source;
      const eval::EvalReport rep = eval::run_louo(windows, cfg, spec);

      nlohmann::ordered_json entry;
      entry["position"] = std::string(position_token(pos));
      entry["source"] = std::string(dataio::source_token(source));
      entry["n_windows"] = windows.size();
      entry["n_subjects"] = subjects.size();
      entry.update(report::eval_report_to_json(rep, class_names));
      configs.push_back(std::move(entry));

      const std::string stem = std::string(position_token(pos)) + "_" +
                               std::string(dataio::source_token(source));
      report::write_text_file(out_dir / ("confusion_" + stem + ".csv"),
                              report::confusion_csv(rep.aggregate, class_names));
      report::write_text_file(
          out_dir / ("confusion_" + stem + ".svg"),
          report::confusion_svg(rep.aggregate, class_names, "recognition " + stem));
      outputs.push_back("confusion_" + stem + ".csv");
      outputs.push_back("confusion_" + stem + ".svg");
    }
  }
  root["configurations"] = configs;
  report::write_text_file(out_dir / "report.json", root.dump(2) + "\n");

  std::vector<std::string> argv = {"eval",    "--data",  cmd.data,
                                   "--out",   cmd.out,   "--seed",
                                   std::to_string(cmd.seed), "--epochs", std::to_string(cmd.epochs),
                                   "--patience", std::to_string(cmd.patience), "--batch",
                                   std::to_string(cmd.batch), "--lr", report::sig6(cmd.lr_initial)};
  if (cmd.position) {
    argv.emplace_back("--position");
    argv.emplace_back(position_token(*cmd.position));
  }
  for (const Source s : cmd.sources) {
    argv.emplace_back("--source");
    argv.emplace_back(dataio::source_token(s));
  }
  outputs.push_back("run_manifest.json");
  detail::write_run_manifest(cmd.out, argv, outputs);
  return root;
}

namespace detail {

// Counting params are tuned per (position, activity, channel). `louo` mode
// rotates the tuning subjects so no segment is counted with parameters fitted
// on its own subject; groups with a single subject fall back to self-tuning.
inline std::vector<counting::CountResult> count_group(
    const std::vector<counting::ExerciseSegment>& segments, GridMode mode,
    const counting::CountConfig& cfg) {
  auto tuned_params = [&](const std::vector<counting::ExerciseSegment>& tune) {
    counting::PeakParamsBySource params;
    params.acc = counting::grid_search_peak_params(tune, counting::CountChannel::Acc, cfg).params;
    params.gyro = counting::grid_search_peak_params(tune, counting::CountChannel::Gyro, cfg).params;
    params.hbc = counting::grid_search_peak_params(tune, counting::CountChannel::Hbc, cfg).params;
    return params;
  };

  std::vector<counting::CountResult> results;
  if (mode == GridMode::UpperBound) {
    const auto params = tuned_params(segments);
    for (const auto& seg : segments) results.push_back(counting::count_segment(seg, cfg, params));
    return results;
  }
  std::set<int> subjects;
  for (const auto& seg : segments) subjects.insert(seg.subject_id);
  for (const int subject : subjects) {
    std::vector<counting::ExerciseSegment> tune;
    for (const auto& seg : segments) {
      if (seg.subject_id != subject) tune.push_back(seg);
    }
    const auto params = tuned_params(tune.empty() ? segments : tune);
    for (const auto& seg : segments) {
      if (seg.subject_id == subject) results.push_back(counting::count_segment(seg, cfg, params));
    }
  }
  return results;
}

}  // namespace detail

inline nlohmann::ordered_json run_count(const CountCmd& cmd) {
  const std::filesystem::path out_dir(cmd.out);
  std::filesystem::create_directories(out_dir);
  const counting::CountConfig ccfg;

  std::map<Position, std::map<ActivityLabel, std::vector<counting::ExerciseSegment>>> groups;
  int n_sessions = 0;
  for (const auto& entry : dataio::scan_manifest(cmd.data)) {
    if (cmd.position && entry.position != *cmd.position) continue;
    if (!entry.counts) {
      throw std::invalid_argument("count: session " + entry.csv.filename().string() +
                                  " has no repetition-count sidecar");
    }
    const auto rec = dataio::parse_session(entry.csv);
    const auto specs = counting::read_counts_sidecar(*entry.counts);
    for (auto& seg : counting::extract_segments(rec, specs)) {
      groups[rec.position][seg.activity].push_back(std::move(seg));
    }
    ++n_sessions;
  }
  if (n_sessions == 0) throw std::invalid_argument("count: no sessions matched in " + cmd.data);

  nlohmann::ordered_json root;
  root["command"] = "count";
  root["data"] = cmd.data;
  root["grid_mode"] = std::string(grid_mode_token(cmd.grid_mode));
  root["position_filter"] =
      cmd.position ? nlohmann::json(std::string(position_token(*cmd.position))) : nlohmann::json();
  nlohmann::ordered_json positions = nlohmann::ordered_json::array();
  std::vector<std::string> outputs = {"report.json"};

  for (const auto& [pos, by_activity] : groups) {
    std::vector<counting::CountResult> results;
    for (const auto& [activity, segments] : by_activity) {
      auto group_results = detail::count_group(segments, cmd.grid_mode, ccfg);
      results.insert(results.end(), group_results.begin(), group_results.end());
    }
    const std::string tok(position_token(pos));
    report::write_text_file(out_dir / ("counting_" + tok + "_detail.csv"),
                            report::counting_detail_csv(results));
    report::write_text_file(out_dir / ("counting_" + tok + "_boxplot.csv"),
                            report::counting_boxplot_csv(results));
    report::write_text_file(out_dir / ("counting_" + tok + "_summary.csv"),
                            report::counting_summary_csv(results));
    outputs.push_back("counting_" + tok + "_detail.csv");
    outputs.push_back("counting_" + tok + "_boxplot.csv");
    outputs.push_back("counting_" + tok + "_summary.csv");

    nlohmann::ordered_json entry;
    entry["position"] = tok;
    entry["segments"] = report::counting_results_to_json(results);
    positions.push_back(std::move(entry));
  }
  root["positions"] = positions;
  report::write_text_file(out_dir / "report.json", root.dump(2) + "\n");

  std::vector<std::string> argv = {"count",       "--data",
                                   cmd.data,      "--out",
                                   cmd.out,       "--grid-mode",
                                   std::string(grid_mode_token(cmd.grid_mode))};
  if (cmd.position) {
    argv.emplace_back("--position");
    argv.emplace_back(position_token(*cmd.position));
  }
  outputs.push_back("run_manifest.json");
  detail::write_run_manifest(cmd.out, argv, outputs);
  return root;
}

inline nlohmann::ordered_json run_auth_cmd(const AuthCmd& cmd) {
  const std::filesystem::path out_dir(cmd.out);
  std::filesystem::create_directories(out_dir);
  const auto by_pos = detail::windows_by_position(cmd.data, cmd.position);
  const eval::TrainSpec spec =
      detail::make_train_spec(cmd.seed, cmd.epochs, cmd.patience, cmd.batch, cmd.lr_initial);

  nlohmann::ordered_json root;
  root["command"] = "auth";
  root["data"] = cmd.data;
  root["source"] = std::string(dataio::source_token(cmd.source));
  root["activity"] = std::string(label_name(cmd.activity));
  root["position_filter"] =
      cmd.position ? nlohmann::json(std::string(position_token(*cmd.position))) : nlohmann::json();
  root["seed"] = cmd.seed;
  root["train"] = {{"max_epochs", spec.max_epochs},
                   {"patience", spec.patience},
                   {"batch_size", spec.batch_size},
                   {"lr_initial", spec.lr.initial}};
  nlohmann::ordered_json configs = nlohmann::ordered_json::array();
  std::vector<std::string> outputs = {"report.json"};

  constexpr int kSubjectClasses = 10;
  const auto class_names = report::subject_class_names(kSubjectClasses);
  for (const auto& [pos, windows] : by_pos) {
    const eval::EvalReport rep =
        eval::run_auth(windows, cmd.source, spec, cmd.activity, kSubjectClasses);

    nlohmann::ordered_json entry;
    entry["position"] = std::string(position_token(pos));
    entry.update(report::eval_report_to_json(rep, class_names));
    configs.push_back(std::move(entry));

    const std::string stem = "auth_" + std::string(position_token(pos)) + "_" +
                             std::string(dataio::source_token(cmd.source));
    report::write_text_file(out_dir / ("confusion_" + stem + ".csv"),
                            report::confusion_csv(rep.aggregate, class_names));
    report::write_text_file(out_dir / ("confusion_" + stem + ".svg"),
                            report::confusion_svg(rep.aggregate, class_names, stem));
    outputs.push_back("confusion_" + stem + ".csv");
    outputs.push_back("confusion_" + stem + ".svg");
  }
  root["configurations"] = configs;
  report::write_text_file(out_dir / "report.json", root.dump(2) + "\n");

  std::vector<std::string> argv = {"auth",     "--data",     cmd.data,
                                   "--out",    cmd.out,      "--source",
                                   std::string(dataio::source_token(cmd.source)), "--activity",
                                   std::string(label_name(cmd.activity)), "--seed",
                                   std::to_string(cmd.seed), "--epochs", std::to_string(cmd.epochs),
                                   "--patience", std::to_string(cmd.patience), "--batch",
                                   std::to_string(cmd.batch), "--lr", report::sig6(cmd.lr_initial)};
  if (cmd.position) {
    argv.emplace_back("--position");
    argv.emplace_back(position_token(*cmd.position));
  }
  outputs.push_back("run_manifest.json");
  detail::write_run_manifest(cmd.out, argv, outputs);
  return root;
}

}  // namespace ws::cli
