#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ws/activity.hpp"

namespace ws::dataio {

inline constexpr double kSamplingRate = 20.0;  // Hz
inline constexpr int kWindowLen = 80;          // 4 s at 20 Hz
inline constexpr int kWindowStride = 40;       // 2 s overlap

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IntegrityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One 20 Hz reading across all channels.
struct SampleFrame {
  double timestamp = 0.0;  // seconds
  double hbc = 0.0;        // body-surface potential, ADC units
  std::array<double, 3> acc{};
  std::array<double, 3> gyro{};
  ActivityLabel label = ActivityLabel::Null;
};

struct SessionRecording {
  int subject_id = 0;  // 1..10
  int day = 0;         // 1..5
  Position position = Position::Wrist;
  WearingConfig wearing{};
  std::vector<SampleFrame> frames;
  std::vector<std::string> warnings;  // transient; not serialized

  void validate() {
    warnings.clear();
    if (subject_id < 1 || subject_id > 10) throw IntegrityError("subject_id out of range 1..10");
    if (day < 1 || day > 5) throw IntegrityError("day out of range 1..5");
    for (size_t i = 1; i < frames.size(); ++i) {
      if (!(frames[i].timestamp > frames[i - 1].timestamp)) {
        throw IntegrityError("timestamps not strictly increasing at row " + std::to_string(i + 1));
      }
    }
    for (const auto& f : frames) {
      for (double v : {f.timestamp, f.hbc, f.acc[0], f.acc[1], f.acc[2], f.gyro[0], f.gyro[1], f.gyro[2]}) {
        if (!std::isfinite(v)) throw IntegrityError("non-finite sample value");
      }
    }
    if (frames.size() >= 2) {
      // Recorded time is one sample period per frame; last-minus-first
      // timestamps would undercount a 10-minute session by one period.
      const double duration = static_cast<double>(frames.size()) / kSamplingRate;
      if (duration < 600.0 || duration > 3.0 * 3600.0) {
        warnings.push_back("session duration " + std::to_string(duration) +
                           " s outside the plausible 10 min .. 3 h range");
      }
      const double nominal = 1.0 / kSamplingRate;
      for (size_t i = 1; i < frames.size(); ++i) {
        const double dt = frames[i].timestamp - frames[i - 1].timestamp;
        if (std::abs(dt - nominal) > 0.2 * nominal) {
          warnings.push_back("timestamp jitter beyond 20% of nominal 50 ms spacing at row " +
                             std::to_string(i + 1));
          break;
        }
      }
    }
  }
};

// Declared CSV layout. The canonical form is the only one the pipeline
// emits; parse checks the header verbatim so adapters for other column
// orders can be layered on top without silent misreads.
struct SessionSchema {
  std::vector<std::string> columns;

  static SessionSchema canonical() {
    return {{"timestamp", "hbc", "ax", "ay", "az", "gx", "gy", "gz", "label"}};
  }

  std::string header() const {
    std::string h;
    for (size_t i = 0; i < columns.size(); ++i) {
      if (i) h += ',';
      h += columns[i];
    }
    return h;
  }
};

enum class Source { Hbc, Imu, Combined };

inline std::string_view source_token(Source s) {
  switch (s) {
    case Source::Hbc: return "hbc";
    case Source::Imu: return "imu";
    case Source::Combined: return "combined";
  }
  throw std::invalid_argument("bad Source");
}

inline Source parse_source(std::string_view t) {
  if (t == "hbc") return Source::Hbc;
  if (t == "imu") return Source::Imu;
  if (t == "combined") return Source::Combined;
  throw std::invalid_argument("unknown source: " + std::string(t));
}

inline int source_channels(Source s) {
  switch (s) {
    case Source::Hbc: return 1;
    case Source::Imu: return 6;
    case Source::Combined: return 7;
  }
  throw std::invalid_argument("bad Source");
}

// One 80-sample classification instance. Channels hold all 7 signals in
// CSV order (hbc, ax, ay, az, gx, gy, gz); source selection slices rows.
struct WindowInstance {
  std::vector<std::vector<double>> channels;  // [7][window_len]
  ActivityLabel label = ActivityLabel::Null;
  int subject_id = 0;
  int day = 0;
  Position position = Position::Wrist;
  int start_index = 0;
};

// Rows of `w.channels` that belong to the requested signal source.
inline std::vector<std::vector<double>> select_channels(const WindowInstance& w, Source s) {
  switch (s) {
    case Source::Hbc: return {w.channels.at(0)};
    case Source::Imu: return {w.channels.begin() + 1, w.channels.end()};
    case Source::Combined: return w.channels;
  }
  throw std::invalid_argument("bad Source");
}

struct Fold {
  int test_subject = 0;
  std::vector<int> train_subjects;
  std::vector<size_t> train_indices;  // into the instance list the plan was built from
  std::vector<size_t> test_indices;
};

struct FoldPlan {
  std::vector<Fold> folds;
};

namespace detail {

inline double parse_double(std::string_view tok, size_t row, const char* what) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw ParseError("row " + std::to_string(row) + ": bad " + what + " value '" + std::string(tok) + "'");
  }
  return v;
}

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("to_chars failed");
  return std::string(buf, ptr);
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

inline std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace detail

// Reads the metadata sidecar sitting next to a session CSV.
inline void read_sidecar(const std::filesystem::path& json_path, SessionRecording& rec) {
  std::ifstream in(json_path);
  if (!in) throw ParseError("cannot open metadata sidecar " + json_path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("bad metadata sidecar " + json_path.string() + ": " + e.what());
  }
  try {
    rec.subject_id = j.at("subject_id").get<int>();
    rec.day = j.at("day").get<int>();
    const auto pos = parse_position(j.at("position").get<std::string>());
    const auto clothes = parse_clothes(j.at("clothes_material").get<std::string>());
    const auto height = parse_sole_height(j.at("sole_height").get<std::string>());
    const auto sole = parse_sole_material(j.at("sole_material").get<std::string>());
    if (!pos || !clothes || !height || !sole) {
      throw SchemaError("metadata sidecar " + json_path.string() + " has an unknown enum token");
    }
    rec.position = *pos;
    rec.wearing = {*clothes, *height, *sole};
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("metadata sidecar " + json_path.string() + " missing field: " + e.what());
  }
}

// Parses one session CSV plus its .json sidecar. Row numbers in error
// messages count data rows from 1 (the header is row 0).
inline SessionRecording parse_session(const std::filesystem::path& csv_path,
                                      const SessionSchema& schema = SessionSchema::canonical()) {
  std::ifstream in(csv_path);
  if (!in) throw ParseError("cannot open " + csv_path.string());

  SessionRecording rec;
  std::filesystem::path sidecar = csv_path;
  sidecar.replace_extension(".json");
  read_sidecar(sidecar, rec);

  std::string line;
  if (!std::getline(in, line)) throw SchemaError(csv_path.string() + ": empty file");
  line = detail::strip_cr(line);
  if (line != schema.header()) {
    throw SchemaError(csv_path.string() + ": header mismatch; expected '" + schema.header() +
                      "', got '" + line + "'");
  }

  size_t row = 0;
  while (std::getline(in, line)) {
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    ++row;
    const auto tok = detail::split_csv(line);
    if (tok.size() != schema.columns.size()) {
      throw ParseError("row " + std::to_string(row) + ": expected " +
                       std::to_string(schema.columns.size()) + " fields, got " +
                       std::to_string(tok.size()));
    }
    SampleFrame f;
    f.timestamp = detail::parse_double(tok[0], row, "timestamp");
    f.hbc = detail::parse_double(tok[1], row, "hbc");
    for (int a = 0; a < 3; ++a) f.acc[a] = detail::parse_double(tok[2 + a], row, "acc");
    for (int g = 0; g < 3; ++g) f.gyro[g] = detail::parse_double(tok[5 + g], row, "gyro");
    const auto label = parse_label(tok[8]);
    if (!label) {
      throw ParseError("row " + std::to_string(row) + ": unknown label token '" +
                       std::string(tok[8]) + "'");
    }
    f.label = *label;
    if (!rec.frames.empty() && !(f.timestamp > rec.frames.back().timestamp)) {
      throw IntegrityError("row " + std::to_string(row) + ": timestamp not strictly increasing");
    }
    rec.frames.push_back(f);
  }
  rec.validate();
  return rec;
}

// Writes the CSV + sidecar pair. Numbers use shortest round-trip decimal
// form, so parse(write(rec)) reproduces every value bit-exactly.
inline void write_session(const SessionRecording& rec, const std::filesystem::path& csv_path,
                          const SessionSchema& schema = SessionSchema::canonical()) {
  std::ofstream out(csv_path);
  if (!out) throw std::runtime_error("cannot write " + csv_path.string());
  out << schema.header() << '\n';
  for (const auto& f : rec.frames) {
    out << detail::format_double(f.timestamp) << ',' << detail::format_double(f.hbc);
    for (double v : f.acc) out << ',' << detail::format_double(v);
    for (double v : f.gyro) out << ',' << detail::format_double(v);
    out << ',' << label_name(f.label) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + csv_path.string());

  nlohmann::json j;
  j["subject_id"] = rec.subject_id;
  j["day"] = rec.day;
  j["position"] = position_token(rec.position);
  j["clothes_material"] = std::string(clothes_name(rec.wearing.clothes_material));
  j["sole_height"] = std::string(sole_height_name(rec.wearing.sole_height));
  j["sole_material"] = std::string(sole_material_name(rec.wearing.sole_material));
  std::filesystem::path sidecar = csv_path;
  sidecar.replace_extension(".json");
  std::ofstream jout(sidecar);
  if (!jout) throw std::runtime_error("cannot write " + sidecar.string());
  jout << j.dump(2) << '\n';
}

// Majority label of a window; ties go to Null (conservative toward the
// background class).
inline ActivityLabel majority_label(const std::vector<ActivityLabel>& labels) {
  std::array<int, kNumActivities> counts{};
  for (ActivityLabel l : labels) counts[static_cast<size_t>(l)]++;
  int best = -1;
  ActivityLabel winner = ActivityLabel::Null;
  bool tie = false;
  for (size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] > best) {
      best = counts[i];
      winner = static_cast<ActivityLabel>(i);
      tie = false;
    } else if (counts[i] == best) {
      tie = true;
    }
  }
  return tie ? ActivityLabel::Null : winner;
}

using LabelRule = ActivityLabel (*)(const std::vector<ActivityLabel>&);

// Slides a fixed window over one session. Sessions shorter than one
// window yield an empty list.
inline std::vector<WindowInstance> window_session(const SessionRecording& rec,
                                                  int window_len = kWindowLen,
                                                  int stride = kWindowStride,
                                                  LabelRule label_rule = &majority_label) {
  if (window_len < 1 || stride < 1) throw std::invalid_argument("window_session: bad geometry");
  std::vector<WindowInstance> out;
  const int n = static_cast<int>(rec.frames.size());
  for (int start = 0; start + window_len <= n; start += stride) {
    WindowInstance w;
    w.subject_id = rec.subject_id;
    w.day = rec.day;
    w.position = rec.position;
    w.start_index = start;
    w.channels.assign(7, std::vector<double>(window_len));
    std::vector<ActivityLabel> labels(window_len);
    for (int i = 0; i < window_len; ++i) {
      const SampleFrame& f = rec.frames[start + i];
      w.channels[0][i] = f.hbc;
      for (int a = 0; a < 3; ++a) w.channels[1 + a][i] = f.acc[a];
      for (int g = 0; g < 3; ++g) w.channels[4 + g][i] = f.gyro[g];
      labels[i] = f.label;
    }
    w.label = label_rule(labels);
    out.push_back(std::move(w));
  }
  return out;
}

// Balanced inverse-frequency weights: weight(c) = N_total / (k · N_c)
// over the k classes present, so every class carries equal total mass.
inline std::map<ActivityLabel, double> compute_sample_weights(
    const std::vector<WindowInstance>& instances) {
  if (instances.empty()) throw std::invalid_argument("compute_sample_weights: no instances");
  std::map<ActivityLabel, size_t> counts;
  for (const auto& w : instances) counts[w.label]++;
  const double total = static_cast<double>(instances.size());
  const double k = static_cast<double>(counts.size());
  std::map<ActivityLabel, double> weights;
  for (const auto& [label, n] : counts) {
    weights[label] = total / (k * static_cast<double>(n));
  }
  return weights;
}

// One fold per subject, ordered by ascending subject id; each fold's test
// side holds exactly that subject's instances.
inline FoldPlan make_louo_folds(const std::vector<WindowInstance>& instances) {
  std::set<int> subjects;
  for (const auto& w : instances) subjects.insert(w.subject_id);
  if (subjects.size() < 2) {
    throw std::invalid_argument("make_louo_folds: need at least 2 subjects");
  }
  FoldPlan plan;
  for (int test : subjects) {
    Fold fold;
    fold.test_subject = test;
    for (int s : subjects) {
      if (s != test) fold.train_subjects.push_back(s);
    }
    for (size_t i = 0; i < instances.size(); ++i) {
      (instances[i].subject_id == test ? fold.test_indices : fold.train_indices).push_back(i);
    }
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

// One dataset-directory entry: S<id>_D<day>_<position>.csv with its
// matching metadata sidecar (and, if present, a ground-truth counts file).
struct ManifestEntry {
  std::filesystem::path csv;
  std::filesystem::path sidecar;
  std::optional<std::filesystem::path> counts;
  int subject_id = 0;
  int day = 0;
  Position position = Position::Wrist;
};

inline std::optional<ManifestEntry> parse_manifest_name(const std::filesystem::path& csv) {
  const std::string stem = csv.stem().string();
  if (stem.size() < 6 || stem[0] != 'S') return std::nullopt;
  const size_t d_pos = stem.find("_D", 1);
  if (d_pos == std::string::npos) return std::nullopt;
  const size_t p_pos = stem.find('_', d_pos + 2);
  if (p_pos == std::string::npos) return std::nullopt;
  ManifestEntry e;
  e.csv = csv;
  try {
    e.subject_id = std::stoi(stem.substr(1, d_pos - 1));
    e.day = std::stoi(stem.substr(d_pos + 2, p_pos - d_pos - 2));
    const auto pos = parse_position(stem.substr(p_pos + 1));
    if (!pos) return std::nullopt;
    e.position = *pos;
  } catch (const std::exception&) {
    return std::nullopt;
  }
  e.sidecar = csv;
  e.sidecar.replace_extension(".json");
  std::filesystem::path counts = csv.parent_path() / (stem + ".counts.json");
  if (std::filesystem::exists(counts)) e.counts = counts;
  return e;
}

// Scans a dataset directory, returning entries sorted by (subject, day,
// position). CSVs without a sidecar or with unrecognized names are errors:
// a half-ingested dataset silently skews every downstream number.
inline std::vector<ManifestEntry> scan_manifest(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw ParseError("dataset directory not found: " + dir.string());
  }
  std::vector<ManifestEntry> entries;
  for (const auto& de : std::filesystem::directory_iterator(dir)) {
    if (!de.is_regular_file() || de.path().extension() != ".csv") continue;
    auto e = parse_manifest_name(de.path());
    if (!e) throw ParseError("unrecognized session file name: " + de.path().string());
    if (!std::filesystem::exists(e->sidecar)) {
      throw ParseError("missing metadata sidecar for " + de.path().string());
    }
    entries.push_back(std::move(*e));
  }
  if (entries.empty()) throw ParseError("no session CSVs in " + dir.string());
  std::sort(entries.begin(), entries.end(), [](const ManifestEntry& a, const ManifestEntry& b) {
    return std::tie(a.subject_id, a.day, a.position) < std::tie(b.subject_id, b.day, b.position);
  });
  return entries;
}

inline std::vector<SessionRecording> load_sessions(const std::filesystem::path& dir,
                                                   std::optional<Position> position = std::nullopt) {
  std::vector<SessionRecording> sessions;
  for (const auto& e : scan_manifest(dir)) {
    if (position && e.position != *position) continue;
    sessions.push_back(parse_session(e.csv));
  }
  return sessions;
}

}  // namespace ws::dataio
