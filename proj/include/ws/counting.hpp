#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ws/activity.hpp"
#include "ws/dataio.hpp"
#include "ws/signal.hpp"

namespace ws::counting {

// The three raw signals a repetition count can be read from. IMU and
// combined results are fusions of these, not channels of their own.
enum class CountChannel { Acc, Gyro, Hbc };

inline constexpr std::array<CountChannel, 3> kAllCountChannels = {
    CountChannel::Acc, CountChannel::Gyro, CountChannel::Hbc};

inline std::string_view count_channel_name(CountChannel c) {
  switch (c) {
    case CountChannel::Acc: return "acc";
    case CountChannel::Gyro: return "gyro";
    case CountChannel::Hbc: return "hbc";
  }
  return "?";
}

// A contiguous single-activity run with its ground-truth repetition count.
struct ExerciseSegment {
  ActivityLabel activity = ActivityLabel::Null;
  std::vector<dataio::SampleFrame> frames;
  int true_count = 0;
  int subject_id = 0;
  int day = 0;
  Position position = Position::Wrist;

  void validate() const {
    if (activity == ActivityLabel::Null) {
      throw std::invalid_argument("ExerciseSegment: Null segments are not countable");
    }
    if (true_count < 1) throw std::invalid_argument("ExerciseSegment: true_count must be >= 1");
    for (const auto& f : frames) {
      if (f.label != activity) {
        throw std::invalid_argument("ExerciseSegment: mixed labels inside segment");
      }
    }
  }
};

struct CountConfig {
  double cutoff_default = 2.5;  // Hz
  double cutoff_fast = 5.0;     // Hz, for the four high-cadence activities
  std::vector<double> thresholds = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<double> min_distance_seconds = {0.25, 0.5,  0.75, 1.0,  1.25, 1.5,
                                              1.75, 2.0,  2.25, 2.5,  2.75, 3.0};

  bool is_fast(ActivityLabel a) const {
    return a == ActivityLabel::Running || a == ActivityLabel::Walking ||
           a == ActivityLabel::Ropeskipping || a == ActivityLabel::Riding;
  }

  double cutoff_for(ActivityLabel a) const { return is_fast(a) ? cutoff_fast : cutoff_default; }
};

// Detected counts per channel plus the two fusion rules and the accuracy
// of each against the segment's ground truth.
struct CountResult {
  ActivityLabel activity = ActivityLabel::Null;
  int true_count = 0;
  int acc = 0;
  int gyro = 0;
  int hbc = 0;
  double imu = 0.0;       // mean of acc and gyro counts
  double combined = 0.0;  // closest-two fusion of all three
  double acc_accuracy = 0.0;
  double gyro_accuracy = 0.0;
  double hbc_accuracy = 0.0;
  double imu_accuracy = 0.0;
  double combined_accuracy = 0.0;
  int subject_id = 0;
  int day = 0;
  Position position = Position::Wrist;
};

inline double count_accuracy(double detected, int real_count) {
  if (real_count < 1) throw std::invalid_argument("count_accuracy: real_count must be >= 1");
  return 1.0 - std::abs(detected - static_cast<double>(real_count)) /
                   static_cast<double>(real_count);
}

inline double fuse_imu(int acc_count, int gyro_count) {
  return (static_cast<double>(acc_count) + static_cast<double>(gyro_count)) / 2.0;
}

// Of the three pairwise combinations, average the pair with the smallest
// absolute difference. Ties prefer a pair containing the HBC count, then
// the lower mean.
inline double fuse_closest_two(int acc, int gyro, int hbc) {
  struct Pair {
    int a, b;
    bool has_hbc;
  };
  const Pair pairs[3] = {{acc, gyro, false}, {acc, hbc, true}, {gyro, hbc, true}};
  int best = -1;
  for (int i = 0; i < 3; ++i) {
    if (best < 0) {
      best = i;
      continue;
    }
    const int d_new = std::abs(pairs[i].a - pairs[i].b);
    const int d_best = std::abs(pairs[best].a - pairs[best].b);
    if (d_new != d_best) {
      if (d_new < d_best) best = i;
      continue;
    }
    if (pairs[i].has_hbc != pairs[best].has_hbc) {
      if (pairs[i].has_hbc) best = i;
      continue;
    }
    if (pairs[i].a + pairs[i].b < pairs[best].a + pairs[best].b) best = i;
  }
  return (static_cast<double>(pairs[best].a) + static_cast<double>(pairs[best].b)) / 2.0;
}

namespace detail {

inline signal::Series channel_series(const ExerciseSegment& seg, CountChannel channel) {
  const size_t n = seg.frames.size();
  signal::Series out;
  out.sampling_rate = dataio::kSamplingRate;
  out.values.resize(n);
  switch (channel) {
    case CountChannel::Hbc:
      for (size_t i = 0; i < n; ++i) out.values[i] = seg.frames[i].hbc;
      break;
    case CountChannel::Acc:
      for (size_t i = 0; i < n; ++i) {
        const auto& a = seg.frames[i].acc;
        out.values[i] = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
      }
      break;
    case CountChannel::Gyro:
      for (size_t i = 0; i < n; ++i) {
        const auto& g = seg.frames[i].gyro;
        out.values[i] = std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
      }
      break;
  }
  return out;
}

inline signal::Series smoothed_series(const ExerciseSegment& seg, CountChannel channel,
                                      const CountConfig& cfg) {
  signal::Series s =
      signal::fourier_lowpass(channel_series(seg, channel), cfg.cutoff_for(seg.activity));
  // A segment whose motion lies entirely above the cutoff comes back flat up
  // to transform round-off. Peak detection rescales by the span, so that
  // round-off ripple would read as repetitions; snap it to a constant.
  const auto [lo, hi] = std::minmax_element(s.values.begin(), s.values.end());
  const double scale = std::max({std::abs(*lo), std::abs(*hi), 1.0});
  if (*hi - *lo < 1e-9 * scale) std::fill(s.values.begin(), s.values.end(), *lo);
  return s;
}

}  // namespace detail

// Magnitude (acc/gyro) or raw channel (hbc) → low-pass at the activity's
// cutoff → peak detection; the count is the number of peaks.
inline int count_source(const ExerciseSegment& seg, CountChannel channel, const CountConfig& cfg,
                        const signal::PeakParams& p) {
  if (seg.frames.size() < 3) throw std::invalid_argument("count_source: segment too short");
  const auto smooth = detail::smoothed_series(seg, channel, cfg);
  return static_cast<int>(signal::detect_peaks(smooth, p).size());
}

struct GridSearchOutcome {
  signal::PeakParams params;
  double mean_accuracy = 0.0;
};

// Scans the threshold × min-distance grid in ascending order and keeps the
// first cell maximizing the mean counting accuracy over the segments. The
// low-pass step does not depend on the grid cell, so it runs once per
// segment.
inline GridSearchOutcome grid_search_peak_params(const std::vector<ExerciseSegment>& segments,
                                                 CountChannel channel, const CountConfig& cfg) {
  if (segments.empty()) throw std::invalid_argument("grid_search_peak_params: no segments");
  std::vector<signal::Series> smoothed;
  smoothed.reserve(segments.size());
  for (const auto& seg : segments) {
    if (seg.frames.size() < 3) throw std::invalid_argument("grid_search_peak_params: segment too short");
    smoothed.push_back(detail::smoothed_series(seg, channel, cfg));
  }
  GridSearchOutcome best;
  bool first = true;
  for (double thres : cfg.thresholds) {
    for (double dist_s : cfg.min_distance_seconds) {
      signal::PeakParams p;
      p.threshold = thres;
      p.min_distance = std::max(1, static_cast<int>(std::lround(dist_s * dataio::kSamplingRate)));
      double sum = 0.0;
      for (size_t i = 0; i < segments.size(); ++i) {
        const int detected = static_cast<int>(signal::detect_peaks(smoothed[i], p).size());
        sum += count_accuracy(detected, segments[i].true_count);
      }
      const double mean = sum / static_cast<double>(segments.size());
      if (first || mean > best.mean_accuracy) {
        best.params = p;
        best.mean_accuracy = mean;
        first = false;
      }
    }
  }
  return best;
}

struct PeakParamsBySource {
  signal::PeakParams acc;
  signal::PeakParams gyro;
  signal::PeakParams hbc;

  const signal::PeakParams& for_channel(CountChannel c) const {
    switch (c) {
      case CountChannel::Acc: return acc;
      case CountChannel::Gyro: return gyro;
      case CountChannel::Hbc: return hbc;
    }
    throw std::invalid_argument("bad CountChannel");
  }
};

inline CountResult count_segment(const ExerciseSegment& seg, const CountConfig& cfg,
                                 const PeakParamsBySource& params) {
  seg.validate();
  CountResult r;
  r.activity = seg.activity;
  r.true_count = seg.true_count;
  r.subject_id = seg.subject_id;
  r.day = seg.day;
  r.position = seg.position;
  r.acc = count_source(seg, CountChannel::Acc, cfg, params.acc);
  r.gyro = count_source(seg, CountChannel::Gyro, cfg, params.gyro);
  r.hbc = count_source(seg, CountChannel::Hbc, cfg, params.hbc);
  r.imu = fuse_imu(r.acc, r.gyro);
  r.combined = fuse_closest_two(r.acc, r.gyro, r.hbc);
  r.acc_accuracy = count_accuracy(r.acc, seg.true_count);
  r.gyro_accuracy = count_accuracy(r.gyro, seg.true_count);
  r.hbc_accuracy = count_accuracy(r.hbc, seg.true_count);
  r.imu_accuracy = count_accuracy(r.imu, seg.true_count);
  r.combined_accuracy = count_accuracy(r.combined, seg.true_count);
  return r;
}

// Ground-truth segment descriptor stored in a session's counts sidecar:
// frame range [start, end) plus the repetition count performed in it.
struct SegmentSpec {
  ActivityLabel activity = ActivityLabel::Null;
  int start = 0;
  int end = 0;
  int count = 0;
};

inline std::vector<SegmentSpec> read_counts_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw dataio::ParseError("cannot open counts sidecar " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw dataio::ParseError("bad counts sidecar " + path.string() + ": " + e.what());
  }
  std::vector<SegmentSpec> specs;
  try {
    for (const auto& item : j.at("segments")) {
      SegmentSpec s;
      const auto label = parse_label(item.at("activity").get<std::string>());
      if (!label) {
        throw dataio::ParseError("counts sidecar " + path.string() + ": unknown activity token");
      }
      s.activity = *label;
      s.start = item.at("start").get<int>();
      s.end = item.at("end").get<int>();
      s.count = item.at("count").get<int>();
      specs.push_back(s);
    }
  } catch (const nlohmann::json::exception& e) {
    throw dataio::SchemaError("counts sidecar " + path.string() + " missing field: " + e.what());
  }
  return specs;
}

inline void write_counts_sidecar(const std::vector<SegmentSpec>& specs,
                                 const std::filesystem::path& path) {
  nlohmann::json j;
  j["segments"] = nlohmann::json::array();
  for (const auto& s : specs) {
    nlohmann::json item;
    item["activity"] = std::string(label_name(s.activity));
    item["start"] = s.start;
    item["end"] = s.end;
    item["count"] = s.count;
    j["segments"].push_back(item);
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// Materializes segments from a recording using sidecar ranges; the frame
// labels must agree with the declared activity.
inline std::vector<ExerciseSegment> extract_segments(const dataio::SessionRecording& rec,
                                                     const std::vector<SegmentSpec>& specs) {
  std::vector<ExerciseSegment> out;
  for (const auto& s : specs) {
    if (s.start < 0 || s.end <= s.start || s.end > static_cast<int>(rec.frames.size())) {
      throw dataio::IntegrityError("segment range [" + std::to_string(s.start) + ", " +
                                   std::to_string(s.end) + ") out of session bounds");
    }
    ExerciseSegment seg;
    seg.activity = s.activity;
    seg.true_count = s.count;
    seg.subject_id = rec.subject_id;
    seg.day = rec.day;
    seg.position = rec.position;
    seg.frames.assign(rec.frames.begin() + s.start, rec.frames.begin() + s.end);
    seg.validate();
    out.push_back(std::move(seg));
  }
  return out;
}

}  // namespace ws::counting
