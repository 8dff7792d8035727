#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ws/activity.hpp"
#include "ws/counting.hpp"
#include "ws/dataio.hpp"
#include "ws/rng.hpp"
#include "ws/signal.hpp"

namespace ws::synth {

// Phase of every emitted oscillation relative to its segment start. A
// small nonzero offset keeps sampled sinusoid crests off the exact
// midpoint between two 20 Hz samples at every repetition frequency used
// here, so each crest is a strict local maximum and peak counts are exact.
inline constexpr double kPhase = 0.1;  // radians

// Noise floor applied to Null (rest) stretches when a noise level is
// requested; rests carry sensor texture but no repetition structure.
inline constexpr double kImuNoiseFloor = 0.05;
inline constexpr double kHbcNoiseFloorRel = 0.002;  // relative to source potential

// Electrical front end: the body capacitance couples into a first-order
// charging/discharging loop, so the surface potential relaxes toward the
// source potential with one time constant and responds to capacitance
// change rate. Values here are plumbing for signal generation, not a
// fidelity claim.
struct FrontEndModel {
  double c_b_rest_pf = 150.0;       // resting body capacitance
  double vs_volts = 1.0;            // source potential
  double supply_current_amps = 1e-9;
  double time_constant_s = 0.05;
  double coupling = 1.0 / 60.0;     // potential response per pF of modulation depth
  std::optional<double> initial_potential;  // default: start settled at vs_volts

  void validate() const {
    if (c_b_rest_pf < 50.0 || c_b_rest_pf > 600.0) {
      throw std::invalid_argument("FrontEndModel: resting C_B outside [50, 600] pF");
    }
    if (!(time_constant_s > 0.0)) {
      throw std::invalid_argument("FrontEndModel: time constant must be > 0");
    }
  }
};

// One scripted stretch of motion. Null events model rest: no repetition
// structure, only the noise floor.
struct MotionEvent {
  ActivityLabel activity = ActivityLabel::Null;
  double duration_s = 0.0;
  double rep_freq_hz = 0.0;            // 0 for Null
  std::array<double, 3> acc_amp{};     // per-axis modulation amplitude
  std::array<double, 3> gyro_amp{};
  double delta_c_pf = 0.0;             // body-capacitance modulation depth
  int reps = 0;                        // ground-truth repetitions (0 for Null)
};

// Per-subject rendering parameters; constant across days so a classifier
// can learn subject identity.
struct SubjectSignature {
  double gain = 1.0;          // scales all modulation amplitudes
  double h2 = 0.1;            // second-harmonic fraction in IMU channels
  double offset_ratio = 3.0;  // static offset per unit modulation amplitude
  double hbc_gain = 1.0;      // scales the capacitance modulation depth
};

struct MotionScript {
  std::vector<MotionEvent> events;
  SubjectSignature signature{};
  std::optional<double> snr_db;  // nullopt = noiseless

  void validate(double fs) const {
    if (events.empty()) throw std::invalid_argument("MotionScript: no events");
    if (!(fs > 0.0)) throw std::invalid_argument("MotionScript: sampling rate must be > 0");
    for (const auto& e : events) {
      if (!(e.duration_s > 0.0)) throw std::invalid_argument("MotionScript: duration must be > 0");
      const double n = e.duration_s * fs;
      if (std::abs(n - std::round(n)) > 1e-6) {
        throw std::invalid_argument("MotionScript: event duration must be a whole number of samples");
      }
      if (e.activity != ActivityLabel::Null) {
        if (!(e.rep_freq_hz > 0.1 && e.rep_freq_hz <= 5.0)) {
          throw std::invalid_argument("MotionScript: repetition frequency outside (0.1, 5] Hz");
        }
        if (e.reps < 1) throw std::invalid_argument("MotionScript: exercise event needs reps >= 1");
        if (std::abs(e.rep_freq_hz * e.duration_s - e.reps) > 1e-9) {
          throw std::invalid_argument(
              "MotionScript: duration must hold a whole number of repetitions");
        }
      }
    }
    // The offset must dominate the modulation so the magnitude follows the
    // waveform monotonically (one magnitude crest per repetition).
    if (!(signature.offset_ratio > signature.gain * (1.0 + signature.h2))) {
      throw std::invalid_argument("MotionScript: offset_ratio must exceed gain*(1+h2)");
    }
    if (signature.h2 < 0.0 || signature.h2 >= 0.25) {
      throw std::invalid_argument("MotionScript: h2 must lie in [0, 0.25)");
    }
  }

  int total_samples(double fs) const {
    int n = 0;
    for (const auto& e : events) n += static_cast<int>(std::round(e.duration_s * fs));
    return n;
  }
};

namespace detail {

inline int event_samples(const MotionEvent& e, double fs) {
  return static_cast<int>(std::round(e.duration_s * fs));
}

// Base repetition waveform: one strict maximum per period for h2 < 0.25.
inline double waveform(double theta, double h2) {
  return std::sin(theta) + h2 * std::sin(2.0 * theta);
}

}  // namespace detail

// Surface potential for a scripted session. Within each event the linear
// charging/discharging dynamics are integrated exactly: the periodic
// steady-state response to the capacitance modulation (amplitude
// κ·ΔC·ωτ/√(1+ω²τ²), phase pinned to kPhase at event start) plus the
// matched exponential transient keeping the potential continuous across
// event boundaries. Rest events relax toward the source potential.
inline signal::Series simulate_hbc(const MotionScript& script, const FrontEndModel& fe, double fs,
                                   uint64_t seed) {
  script.validate(fs);
  fe.validate();
  const double tau = fe.time_constant_s;
  const double vs = fe.vs_volts;
  for (const auto& e : script.events) {
    const double depth = std::abs(e.delta_c_pf) * script.signature.hbc_gain;
    if (fe.c_b_rest_pf - depth < 50.0 || fe.c_b_rest_pf + depth > 600.0) {
      throw std::invalid_argument("simulate_hbc: modulated C_B leaves [50, 600] pF");
    }
  }

  signal::Series out;
  out.sampling_rate = fs;
  out.values.reserve(static_cast<size_t>(script.total_samples(fs)));
  double v_prev = fe.initial_potential.value_or(vs);

  for (const auto& e : script.events) {
    const int n = detail::event_samples(e, fs);
    if (e.activity == ActivityLabel::Null || e.rep_freq_hz <= 0.0 || e.delta_c_pf == 0.0) {
      const double m = v_prev - vs;
      for (int i = 0; i < n; ++i) {
        out.values.push_back(vs + m * std::exp(-(i / fs) / tau));
      }
      v_prev = vs + m * std::exp(-(n / fs) / tau);
      continue;
    }
    const double w = 2.0 * signal::kPi * e.rep_freq_hz;
    const double r = script.signature.hbc_gain * fe.coupling * e.delta_c_pf * w * tau /
                     std::sqrt(1.0 + w * tau * w * tau);
    const double m = v_prev - (vs + r * std::sin(kPhase));
    for (int i = 0; i < n; ++i) {
      const double t = i / fs;
      out.values.push_back(vs + r * std::sin(w * t + kPhase) + m * std::exp(-t / tau));
    }
    const double d = n / fs;
    v_prev = vs + r * std::sin(w * d + kPhase) + m * std::exp(-d / tau);
  }

  if (script.snr_db) {
    Rng noise(derive_seed(seed, 0x68626331));
    const double atten = std::pow(10.0, -*script.snr_db / 20.0) / std::sqrt(2.0);
    size_t idx = 0;
    for (const auto& e : script.events) {
      const int n = detail::event_samples(e, fs);
      double sigma = kHbcNoiseFloorRel * vs;
      if (e.activity != ActivityLabel::Null && e.rep_freq_hz > 0.0 && e.delta_c_pf != 0.0) {
        const double w = 2.0 * signal::kPi * e.rep_freq_hz;
        const double r = script.signature.hbc_gain * fe.coupling * e.delta_c_pf * w * tau /
                         std::sqrt(1.0 + w * tau * w * tau);
        sigma = r * atten;
      }
      for (int i = 0; i < n; ++i) out.values[idx++] += sigma * noise.normal();
    }
  }
  return out;
}

// Six IMU channels (acc xyz, gyro xyz). Each axis carries a static offset
// proportional to its modulation amplitude plus the gain-scaled repetition
// waveform; keeping the offset parallel to the modulation makes the
// vector magnitude an affine image of the waveform, so magnitude peaks
// coincide with repetitions exactly.
inline std::array<signal::Series, 6> simulate_imu(const MotionScript& script, double fs,
                                                  uint64_t seed) {
  script.validate(fs);
  const int total = script.total_samples(fs);
  std::array<signal::Series, 6> out;
  for (auto& s : out) {
    s.sampling_rate = fs;
    s.values.assign(static_cast<size_t>(total), 0.0);
  }
  const auto& sig = script.signature;

  int base = 0;
  for (const auto& e : script.events) {
    const int n = detail::event_samples(e, fs);
    if (e.activity != ActivityLabel::Null && e.rep_freq_hz > 0.0) {
      const double w = 2.0 * signal::kPi * e.rep_freq_hz;
      for (int i = 0; i < n; ++i) {
        const double u = detail::waveform(w * (i / fs) + kPhase, sig.h2);
        for (int c = 0; c < 3; ++c) {
          out[c].values[base + i] = e.acc_amp[c] * (sig.offset_ratio + sig.gain * u);
          out[3 + c].values[base + i] = e.gyro_amp[c] * (sig.offset_ratio + sig.gain * u);
        }
      }
    }
    base += n;
  }

  if (script.snr_db) {
    const double atten = std::pow(10.0, -*script.snr_db / 20.0);
    // RMS of sin θ + h2·sin 2θ over whole periods; the cross term integrates
    // away, so each axis's clean AC power is (amp·gain)²·(1 + h2²)/2.
    const double ac_rms = std::sqrt((1.0 + sig.h2 * sig.h2) / 2.0);
    for (int c = 0; c < 6; ++c) {
      Rng noise(derive_seed(seed, 0x696d7500 + static_cast<uint64_t>(c)));
      int pos = 0;
      for (const auto& e : script.events) {
        const int n = detail::event_samples(e, fs);
        double sigma = kImuNoiseFloor;
        if (e.activity != ActivityLabel::Null && e.rep_freq_hz > 0.0) {
          const auto& amp = c < 3 ? e.acc_amp : e.gyro_amp;
          sigma = std::max(kImuNoiseFloor, sig.gain * std::abs(amp[c % 3]) * ac_rms * atten);
        }
        for (int i = 0; i < n; ++i) out[c].values[pos + i] += sigma * noise.normal();
        pos += n;
      }
    }
  }
  return out;
}

// Per-activity motion parameters: repetition frequency, per-axis
// modulation amplitudes, and capacitance modulation depth. Frequencies are
// distinct per activity and sit below the counting cutoffs (2.5 Hz, or
// 5 Hz for the four high-cadence activities).
struct ActivityMotion {
  double freq = 0.0;
  std::array<double, 3> acc_amp{};
  std::array<double, 3> gyro_amp{};
  double delta_c_pf = 0.0;
  bool strength = false;  // performed in sets of counted repetitions
};

inline const ActivityMotion& activity_motion(ActivityLabel a) {
  static const std::array<ActivityMotion, kNumActivities> table = [] {
    std::array<ActivityMotion, kNumActivities> t{};
    auto set = [&t](ActivityLabel l, double f, std::array<double, 3> aa, std::array<double, 3> ga,
                    double dc, bool strength) {
      t[static_cast<size_t>(l)] = ActivityMotion{f, aa, ga, dc, strength};
    };
    set(ActivityLabel::Adductor, 0.4, {0.5, 0.9, 0.35}, {0.8, 0.4, 0.3}, 9.0, true);
    set(ActivityLabel::Armcurl, 0.8, {1.0, 0.45, 0.3}, {0.5, 1.0, 0.6}, 12.0, true);
    set(ActivityLabel::Benchpress, 0.5, {0.8, 0.8, 0.5}, {0.3, 0.7, 0.9}, 10.0, true);
    set(ActivityLabel::Legcurl, 1.0, {0.4, 1.1, 0.6}, {1.0, 0.5, 0.4}, 8.0, true);
    set(ActivityLabel::Legpress, 0.625, {0.9, 0.5, 0.8}, {0.6, 0.8, 0.5}, 11.0, true);
    set(ActivityLabel::Squat, 1.25, {0.6, 1.0, 0.8}, {0.7, 0.6, 1.0}, 13.0, true);
    set(ActivityLabel::Stairsclimber, 1.5, {0.7, 0.8, 0.6}, {0.9, 0.7, 0.5}, 9.0, false);
    set(ActivityLabel::Riding, 1.6, {0.5, 0.6, 1.0}, {1.1, 0.8, 0.6}, 7.0, false);
    set(ActivityLabel::Walking, 1.8, {1.0, 0.7, 0.5}, {0.6, 1.0, 0.8}, 8.0, false);
    set(ActivityLabel::Ropeskipping, 2.2, {1.2, 0.9, 0.7}, {0.8, 1.1, 0.9}, 10.0, false);
    set(ActivityLabel::Running, 2.4, {1.3, 1.0, 0.8}, {1.0, 1.2, 0.9}, 9.0, false);
    return t;
  }();
  if (a == ActivityLabel::Null) throw std::invalid_argument("activity_motion: Null has no motion");
  return table[static_cast<size_t>(a)];
}

inline double position_gain(Position p) {
  switch (p) {
    case Position::Wrist: return 1.0;
    case Position::Leg: return 0.9;
    case Position::Pocket: return 0.8;
  }
  return 1.0;
}

struct SynthOptions {
  Position position = Position::Wrist;
  std::vector<ActivityLabel> activities = {
      ActivityLabel::Adductor,      ActivityLabel::Armcurl,  ActivityLabel::Benchpress,
      ActivityLabel::Legcurl,       ActivityLabel::Legpress, ActivityLabel::Squat,
      ActivityLabel::Stairsclimber, ActivityLabel::Riding,   ActivityLabel::Walking,
      ActivityLabel::Ropeskipping,  ActivityLabel::Running};
  int sets_per_activity = 3;
  int reps_per_set = 10;
  double aerobic_duration_s = 20.0;
  double rest_s = 2.0;
  double pad_to_s = 600.0;  // trailing rest so sessions reach a plausible length
  std::optional<double> snr_db = 30.0;
  double sampling_rate = dataio::kSamplingRate;
  FrontEndModel front_end{};
};

inline SubjectSignature subject_signature(uint64_t dataset_seed, int subject_id) {
  Rng r(derive_seed(dataset_seed, 0x73696700 + static_cast<uint64_t>(subject_id)));
  SubjectSignature s;
  s.gain = r.uniform(0.7, 1.3);
  s.h2 = r.uniform(0.0, 0.2);
  s.offset_ratio = r.uniform(2.8, 3.2);
  s.hbc_gain = r.uniform(0.7, 1.3);
  return s;
}

// Builds one session's script: a leading rest, then each activity as
// counted sets (strength) or one continuous stretch (aerobic), with rests
// in between, padded with trailing rest up to the target length.
inline MotionScript build_session_script(const SynthOptions& opt, const SubjectSignature& sig) {
  if (opt.activities.empty()) throw std::invalid_argument("build_session_script: no activities");
  if (opt.sets_per_activity < 1 || opt.reps_per_set < 1) {
    throw std::invalid_argument("build_session_script: sets and reps must be >= 1");
  }
  if (!(opt.rest_s > 0.0)) throw std::invalid_argument("build_session_script: rest must be > 0");

  MotionScript script;
  script.signature = sig;
  script.snr_db = opt.snr_db;
  const double pg = position_gain(opt.position);
  script.signature.gain *= pg;
  script.signature.hbc_gain *= pg;

  auto rest = [&](double dur) {
    MotionEvent e;
    e.activity = ActivityLabel::Null;
    e.duration_s = dur;
    script.events.push_back(e);
  };

  rest(opt.rest_s);
  for (ActivityLabel a : opt.activities) {
    const auto& motion = activity_motion(a);
    const int n_segments = motion.strength ? opt.sets_per_activity : 1;
    for (int s = 0; s < n_segments; ++s) {
      MotionEvent e;
      e.activity = a;
      e.rep_freq_hz = motion.freq;
      e.acc_amp = motion.acc_amp;
      e.gyro_amp = motion.gyro_amp;
      e.delta_c_pf = motion.delta_c_pf;
      if (motion.strength) {
        e.reps = opt.reps_per_set;
        e.duration_s = static_cast<double>(opt.reps_per_set) / motion.freq;
      } else {
        e.duration_s = opt.aerobic_duration_s;
        const double reps = motion.freq * opt.aerobic_duration_s;
        e.reps = static_cast<int>(std::round(reps));
        if (std::abs(reps - e.reps) > 1e-9) {
          throw std::invalid_argument(
              "build_session_script: aerobic duration must hold a whole number of repetitions");
        }
      }
      script.events.push_back(e);
      rest(opt.rest_s);
    }
  }

  const double fs = opt.sampling_rate;
  const double used = script.total_samples(fs) / fs;
  if (opt.pad_to_s > used) {
    const double pad = std::round((opt.pad_to_s - used) * fs) / fs;
    if (pad > 0.0) rest(pad);
  }
  script.validate(fs);
  return script;
}

struct BuiltSession {
  dataio::SessionRecording recording;
  std::vector<counting::SegmentSpec> segments;
};

// Renders a script into a canonical session: 20 Hz frames with labels and
// the ground-truth segment ranges for counting.
inline BuiltSession build_session(const MotionScript& script, const SynthOptions& opt,
                                  int subject_id, int day, uint64_t session_seed) {
  const double fs = opt.sampling_rate;
  const auto hbc = simulate_hbc(script, opt.front_end, fs, session_seed);
  const auto imu = simulate_imu(script, fs, derive_seed(session_seed, 0x696d75));

  BuiltSession out;
  out.recording.subject_id = subject_id;
  out.recording.day = day;
  out.recording.position = opt.position;
  out.recording.wearing = wearing_for_day(day);

  const int total = script.total_samples(fs);
  out.recording.frames.resize(static_cast<size_t>(total));
  int base = 0;
  for (const auto& e : script.events) {
    const int n = detail::event_samples(e, fs);
    for (int i = 0; i < n; ++i) {
      auto& f = out.recording.frames[base + i];
      f.timestamp = (base + i) / fs;
      f.hbc = hbc.values[base + i];
      for (int c = 0; c < 3; ++c) f.acc[c] = imu[c].values[base + i];
      for (int c = 0; c < 3; ++c) f.gyro[c] = imu[3 + c].values[base + i];
      f.label = e.activity;
    }
    if (e.activity != ActivityLabel::Null) {
      counting::SegmentSpec spec;
      spec.activity = e.activity;
      spec.start = base;
      spec.end = base + n;
      spec.count = e.reps;
      out.segments.push_back(spec);
    }
    base += n;
  }
  out.recording.validate();
  return out;
}

// Generates a full dataset directory: one session per subject × day at the
// configured position, in the canonical CSV + sidecar layout, plus the
// ground-truth counts file per session.
inline std::vector<dataio::ManifestEntry> generate_dataset(const std::filesystem::path& dir,
                                                           int n_subjects, int n_days,
                                                           uint64_t seed,
                                                           const SynthOptions& opt = {}) {
  if (n_subjects < 2) throw std::invalid_argument("generate_dataset: need at least 2 subjects");
  if (n_days < 1) throw std::invalid_argument("generate_dataset: need at least 1 day");
  if (n_subjects > 10 || n_days > 5) {
    throw std::invalid_argument("generate_dataset: at most 10 subjects and 5 days");
  }
  std::filesystem::create_directories(dir);

  std::vector<dataio::ManifestEntry> entries;
  for (int sid = 1; sid <= n_subjects; ++sid) {
    const SubjectSignature sig = subject_signature(seed, sid);
    for (int day = 1; day <= n_days; ++day) {
      const auto script = build_session_script(opt, sig);
      const uint64_t session_seed = derive_seed(
          seed, 0x73657300 + static_cast<uint64_t>(sid) * 64 + static_cast<uint64_t>(day) * 8 +
                    static_cast<uint64_t>(opt.position));
      const auto built = build_session(script, opt, sid, day, session_seed);

      const std::string stem = "S" + std::to_string(sid) + "_D" + std::to_string(day) + "_" +
                               position_token(opt.position);
      const auto csv = dir / (stem + ".csv");
      dataio::write_session(built.recording, csv);
      counting::write_counts_sidecar(built.segments, dir / (stem + ".counts.json"));

      dataio::ManifestEntry entry;
      entry.csv = csv;
      entry.sidecar = dir / (stem + ".json");
      entry.counts = dir / (stem + ".counts.json");
      entry.subject_id = sid;
      entry.day = day;
      entry.position = opt.position;
      entries.push_back(std::move(entry));
    }
  }
  return entries;
}

}  // namespace ws::synth
