#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ws/dataio.hpp"
#include "ws/loss.hpp"
#include "ws/metrics.hpp"
#include "ws/model.hpp"
#include "ws/optim.hpp"
#include "ws/rng.hpp"

namespace ws::eval {

using dataio::Fold;
using dataio::FoldPlan;
using dataio::make_louo_folds;
using dataio::Source;
using dataio::source_channels;
using dataio::WindowInstance;

struct TrainSpec {
  int max_epochs = 1000;
  int patience = 100;
  int batch_size = 256;
  nn::LrSchedule lr;
  uint64_t seed = 0;
  double val_fraction = 0.1;
  bool class_weighting = true;  // balanced inverse-frequency sample weights

  void validate() const {
    if (max_epochs < 1 || batch_size < 1) {
      throw std::invalid_argument("TrainSpec: max_epochs and batch_size must be positive");
    }
    if (patience < 1 || patience >= max_epochs) {
      throw std::invalid_argument("TrainSpec: patience must lie in [1, max_epochs)");
    }
    if (val_fraction <= 0.0 || val_fraction >= 1.0) {
      throw std::invalid_argument("TrainSpec: val_fraction must be in (0,1)");
    }
  }
};

// Per-channel affine standardization fitted on training windows. Statistics
// are dataset-wide (not per-window) so that per-subject gain/offset structure
// survives for authentication.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  static Standardizer fit(const std::vector<const WindowInstance*>& windows, Source source) {
    if (windows.empty()) throw std::invalid_argument("Standardizer: no windows");
    const int C = source_channels(source);
    const int row0 = source == Source::Imu ? 1 : 0;
    Standardizer st;
    st.mean.assign(C, 0.0);
    st.stddev.assign(C, 0.0);
    int64_t n = 0;
    for (const auto* w : windows) n += static_cast<int64_t>(w->channels[0].size());
    for (int c = 0; c < C; ++c) {
      double s = 0.0;
      for (const auto* w : windows) {
        for (const double v : w->channels[row0 + c]) s += v;
      }
      st.mean[c] = s / static_cast<double>(n);
      double ss = 0.0;
      for (const auto* w : windows) {
        for (const double v : w->channels[row0 + c]) {
          const double d = v - st.mean[c];
          ss += d * d;
        }
      }
      const double var = ss / static_cast<double>(n);
      st.stddev[c] = var > 1e-24 ? std::sqrt(var) : 1.0;
    }
    return st;
  }
};

namespace detail {

inline nn::Tensor make_batch(const std::vector<const WindowInstance*>& windows,
                             const std::vector<size_t>& order, size_t begin, size_t count,
                             const Standardizer& st, Source source, int window_len) {
  const int C = source_channels(source);
  const int row0 = source == Source::Imu ? 1 : 0;
  std::vector<double> data(count * static_cast<size_t>(C) * window_len);
  for (size_t i = 0; i < count; ++i) {
    const WindowInstance& w = *windows[order[begin + i]];
    for (int c = 0; c < C; ++c) {
      const auto& src = w.channels[row0 + c];
      double* dst = data.data() + (i * C + c) * window_len;
      const double mu = st.mean[c], inv = 1.0 / st.stddev[c];
      for (int t = 0; t < window_len; ++t) dst[t] = (src[t] - mu) * inv;
    }
  }
  return nn::Tensor::from({static_cast<int>(count), C, window_len}, std::move(data), false);
}

// Class weights N_total / (k · N_c) over integer targets.
inline std::map<int, double> target_weights(const std::vector<int>& targets) {
  std::map<int, int64_t> counts;
  for (const int t : targets) counts[t] += 1;
  std::map<int, double> weights;
  const double total = static_cast<double>(targets.size());
  const double k = static_cast<double>(counts.size());
  for (const auto& [cls, n] : counts) weights[cls] = total / (k * static_cast<double>(n));
  return weights;
}

}  // namespace detail

struct TrainedModel {
  nn::Network net;
  Standardizer standardizer;
  int epochs_run = 0;
  int best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  double final_lr = 0.0;
};

// How windows map to classifier targets: activity recognition classifies the
// window label; authentication classifies the subject.
struct TrainTask {
  enum class Target { Activity, Subject };
  Target target = Target::Activity;

  int target_of(const WindowInstance& w) const {
    return target == Target::Activity ? static_cast<int>(w.label) : w.subject_id - 1;
  }
  // Subject-held-out validation is meaningless when subjects are the classes.
  bool subject_held_out_validation() const { return target == Target::Activity; }
};

inline TrainedModel train_fold(const nn::ModelConfig& cfg, std::vector<const WindowInstance*> fold_train,
                               const TrainSpec& spec, const TrainTask& task = {}) {
  cfg.validate();
  spec.validate();
  if (fold_train.size() < 2) {
    throw std::invalid_argument("train_fold: need at least 2 training windows, got " +
                                std::to_string(fold_train.size()));
  }
  std::vector<int> all_targets(fold_train.size());
  std::set<int> classes;
  for (size_t i = 0; i < fold_train.size(); ++i) {
    all_targets[i] = task.target_of(*fold_train[i]);
    if (all_targets[i] < 0 || all_targets[i] >= cfg.n_classes) {
      throw std::invalid_argument("train_fold: target " + std::to_string(all_targets[i]) +
                                  " outside [0," + std::to_string(cfg.n_classes) + ")");
    }
    classes.insert(all_targets[i]);
  }
  if (classes.size() < 2) throw std::invalid_argument("train_fold: training set has fewer than 2 classes");

  // Validation split: hold out ~val_fraction of training subjects (seeded);
  // fall back to a window-level split when subjects are the classes or only
  // one training subject exists.
  Rng split_rng(derive_seed(spec.seed, UINT64_C(0x76616c)));
  std::vector<size_t> train_idx, val_idx;
  std::set<int> subject_set;
  for (const auto* w : fold_train) subject_set.insert(w->subject_id);
  if (task.subject_held_out_validation() && subject_set.size() >= 2) {
    std::vector<int> subjects(subject_set.begin(), subject_set.end());
    split_rng.shuffle(subjects);
    const size_t n_val = std::min(subjects.size() - 1,
                                  static_cast<size_t>(std::ceil(spec.val_fraction * subjects.size())));
    const std::set<int> val_subjects(subjects.begin(), subjects.begin() + n_val);
    for (size_t i = 0; i < fold_train.size(); ++i) {
      (val_subjects.count(fold_train[i]->subject_id) ? val_idx : train_idx).push_back(i);
    }
  } else {
    std::vector<size_t> order(fold_train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    split_rng.shuffle(order);
    size_t n_val = static_cast<size_t>(std::llround(spec.val_fraction * order.size()));
    n_val = std::clamp<size_t>(n_val, 1, order.size() - 1);
    val_idx.assign(order.begin(), order.begin() + n_val);
    train_idx.assign(order.begin() + n_val, order.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
  }
  {
    std::set<int> seen;
    for (const size_t i : train_idx) seen.insert(all_targets[i]);
    if (seen.size() < 2) {
      throw std::invalid_argument("train_fold: validation split left fewer than 2 classes to train on");
    }
  }

  std::vector<const WindowInstance*> train_part;
  train_part.reserve(train_idx.size());
  for (const size_t i : train_idx) train_part.push_back(fold_train[i]);
  TrainedModel out;
  out.standardizer = Standardizer::fit(train_part, cfg.source);

  const auto weights_by_class = detail::target_weights(all_targets);
  auto weight_of = [&](int cls) {
    if (!spec.class_weighting) return 1.0;
    const auto it = weights_by_class.find(cls);
    return it == weights_by_class.end() ? 1.0 : it->second;
  };

  Rng init_rng(derive_seed(spec.seed, UINT64_C(0x696e6974)));
  out.net = task.target == TrainTask::Target::Subject ? nn::Network::build_auth(cfg, init_rng)
                                                      : nn::Network::build(cfg, init_rng);
  std::vector<nn::Tensor> params = out.net.parameters();
  nn::AdamState adam;
  adam.reset(params);

  Rng shuffle_rng(derive_seed(spec.seed, UINT64_C(0x73687566)));
  Rng dropout_rng(derive_seed(spec.seed, UINT64_C(0x64726f70)));

  auto eval_loss = [&](const std::vector<size_t>& idxs) {
    double weighted = 0.0, total_w = 0.0;
    Rng unused(0);
    for (size_t at = 0; at < idxs.size(); at += static_cast<size_t>(spec.batch_size)) {
      const size_t count = std::min<size_t>(spec.batch_size, idxs.size() - at);
      const nn::Tensor x = detail::make_batch(fold_train, idxs, at, count, out.standardizer,
                                              cfg.source, cfg.window_len);
      const nn::Tensor probs = out.net.forward(x, nn::Mode::Eval, unused).probs;
      for (size_t i = 0; i < count; ++i) {
        const int y = all_targets[idxs[at + i]];
        const double p = probs.value()[i * cfg.n_classes + y];
        const double w = weight_of(y);
        weighted -= w * std::log(std::max(p, nn::kLogClamp));
        total_w += w;
      }
    }
    return weighted / total_w;
  };

  std::vector<std::vector<double>> best_params;
  auto snapshot = [&] {
    best_params.clear();
    for (const auto& p : params) best_params.push_back(p.value());
  };
  snapshot();

  for (int epoch = 1; epoch <= spec.max_epochs; ++epoch) {
    shuffle_rng.shuffle(train_idx);
    for (size_t at = 0; at < train_idx.size(); at += static_cast<size_t>(spec.batch_size)) {
      const size_t count = std::min<size_t>(spec.batch_size, train_idx.size() - at);
      const nn::Tensor x = detail::make_batch(fold_train, train_idx, at, count, out.standardizer,
                                              cfg.source, cfg.window_len);
      std::vector<int> targets(count);
      std::vector<double> wts(count);
      for (size_t i = 0; i < count; ++i) {
        targets[i] = all_targets[train_idx[at + i]];
        wts[i] = weight_of(targets[i]);
      }
      const nn::Tensor probs = out.net.forward(x, nn::Mode::Train, dropout_rng).probs;
      const nn::Tensor loss = nn::weighted_cross_entropy(probs, targets, wts);
      if (!std::isfinite(loss.item())) {
        throw std::runtime_error("train_fold: loss diverged to " + std::to_string(loss.item()) +
                                 " at epoch " + std::to_string(epoch) + ", step " +
                                 std::to_string(adam.step) + ", lr " +
                                 std::to_string(nn::lr_at(spec.lr, adam.step)));
      }
      for (auto& p : params) p.zero_grad();
      nn::backward(loss);
      nn::adam_step(params, adam, nn::lr_at(spec.lr, adam.step));
    }
    out.epochs_run = epoch;
    const double val_loss = eval_loss(val_idx);
    if (val_loss < out.best_val_loss) {
      out.best_val_loss = val_loss;
      out.best_epoch = epoch;
      snapshot();
    }
    if (epoch - out.best_epoch >= spec.patience) break;
  }

  for (size_t i = 0; i < params.size(); ++i) params[i].node()->value = best_params[i];
  out.final_lr = nn::lr_at(spec.lr, adam.step);
  return out;
}

inline std::vector<int> predict(const TrainedModel& model, const std::vector<const WindowInstance*>& windows,
                                int batch_size = 256) {
  const auto& cfg = model.net.config();
  std::vector<size_t> order(windows.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<int> preds;
  preds.reserve(windows.size());
  Rng unused(0);
  for (size_t at = 0; at < windows.size(); at += static_cast<size_t>(batch_size)) {
    const size_t count = std::min<size_t>(batch_size, windows.size() - at);
    const nn::Tensor x = detail::make_batch(windows, order, at, count, model.standardizer,
                                            cfg.source, cfg.window_len);
    const nn::Tensor probs = model.net.forward(x, nn::Mode::Eval, unused).probs;
    for (size_t i = 0; i < count; ++i) {
      const double* row = probs.value().data() + i * cfg.n_classes;
      preds.push_back(static_cast<int>(std::max_element(row, row + cfg.n_classes) - row));
    }
  }
  return preds;
}

struct FoldOutcome {
  std::string held_out;
  Metrics metrics;
  int epochs_run = 0;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  double final_lr = 0.0;
};

struct EvalReport {
  Metrics aggregate;
  double fold_mean_accuracy = 0.0;
  std::vector<FoldOutcome> folds;
};

// Leave-one-user-out driver. Scans every fold for test-subject leakage
// before training and pools test predictions across folds.
inline EvalReport run_louo(const std::vector<WindowInstance>& instances, const nn::ModelConfig& cfg,
                           const TrainSpec& spec) {
  const FoldPlan plan = make_louo_folds(instances);
  EvalReport report;
  std::vector<int> pooled_preds, pooled_labels;
  const TrainTask task{TrainTask::Target::Activity};
  for (const Fold& fold : plan.folds) {
    for (const size_t i : fold.train_indices) {
      if (instances[i].subject_id == fold.test_subject) {
        throw std::logic_error("run_louo: training set of fold for subject " +
                               std::to_string(fold.test_subject) + " leaks test-subject window " +
                               std::to_string(i));
      }
    }
    std::vector<const WindowInstance*> train, test;
    for (const size_t i : fold.train_indices) train.push_back(&instances[i]);
    for (const size_t i : fold.test_indices) test.push_back(&instances[i]);
    const TrainedModel model = train_fold(cfg, std::move(train), spec, task);
    const std::vector<int> preds = predict(model, test, spec.batch_size);
    std::vector<int> labels(test.size());
    for (size_t i = 0; i < test.size(); ++i) labels[i] = static_cast<int>(test[i]->label);

    FoldOutcome oc;
    oc.held_out = "subject_" + std::to_string(fold.test_subject);
    oc.metrics = compute_metrics(preds, labels, cfg.n_classes);
    oc.epochs_run = model.epochs_run;
    oc.best_epoch = model.best_epoch;
    oc.best_val_loss = model.best_val_loss;
    oc.final_lr = model.final_lr;
    report.folds.push_back(std::move(oc));
    pooled_preds.insert(pooled_preds.end(), preds.begin(), preds.end());
    pooled_labels.insert(pooled_labels.end(), labels.begin(), labels.end());
  }
  report.aggregate = compute_metrics(pooled_preds, pooled_labels, cfg.n_classes);
  double acc = 0.0;
  for (const auto& f : report.folds) acc += f.metrics.accuracy;
  report.fold_mean_accuracy = acc / static_cast<double>(report.folds.size());
  return report;
}

// Authentication: classify the subject from windows of one activity with a
// rotating day-held-out split (train on the other days, test on one day).
inline EvalReport run_auth(const std::vector<WindowInstance>& instances, Source source,
                           const TrainSpec& spec, ActivityLabel activity = ActivityLabel::Running,
                           int n_subject_classes = 10) {
  std::vector<const WindowInstance*> pool;
  for (const auto& w : instances) {
    if (w.label == activity) pool.push_back(&w);
  }
  if (pool.empty()) {
    throw std::invalid_argument("run_auth: no windows labeled " +
                                std::string(label_name(activity)));
  }
  std::set<int> subjects;
  std::set<int> days;
  for (const auto* w : pool) {
    subjects.insert(w->subject_id);
    days.insert(w->day);
    if (w->subject_id < 1 || w->subject_id > n_subject_classes) {
      throw std::invalid_argument("run_auth: subject " + std::to_string(w->subject_id) +
                                  " outside the " + std::to_string(n_subject_classes) +
                                  "-class output domain");
    }
  }
  if (subjects.size() < 2) throw std::invalid_argument("run_auth: need at least 2 subjects");
  if (days.size() < 2) throw std::invalid_argument("run_auth: need at least 2 recording days");

  nn::ModelConfig cfg;
  cfg.source = source;
  cfg.n_classes = n_subject_classes;
  const TrainTask task{TrainTask::Target::Subject};

  EvalReport report;
  std::vector<int> pooled_preds, pooled_labels;
  for (const int test_day : days) {
    std::vector<const WindowInstance*> train, test;
    for (const auto* w : pool) (w->day == test_day ? test : train).push_back(w);
    const TrainedModel model = train_fold(cfg, std::move(train), spec, task);
    const std::vector<int> preds = predict(model, test, spec.batch_size);
    std::vector<int> labels(test.size());
    for (size_t i = 0; i < test.size(); ++i) labels[i] = test[i]->subject_id - 1;

    FoldOutcome oc;
    oc.held_out = "day_" + std::to_string(test_day);
    oc.metrics = compute_metrics(preds, labels, cfg.n_classes);
    oc.epochs_run = model.epochs_run;
    oc.best_epoch = model.best_epoch;
    oc.best_val_loss = model.best_val_loss;
    oc.final_lr = model.final_lr;
    report.folds.push_back(std::move(oc));
    pooled_preds.insert(pooled_preds.end(), preds.begin(), preds.end());
    pooled_labels.insert(pooled_labels.end(), labels.begin(), labels.end());
  }
  report.aggregate = compute_metrics(pooled_preds, pooled_labels, cfg.n_classes);
  double acc = 0.0;
  for (const auto& f : report.folds) acc += f.metrics.accuracy;
  report.fold_mean_accuracy = acc / static_cast<double>(report.folds.size());
  return report;
}

// Versioned checkpoint: magic, JSON header (config, kind, standardizer,
// training metadata, seed), then raw little-endian doubles for parameters
// and, when present, Adam moments.
inline constexpr char kCheckpointMagic[8] = {'W', 'S', 'C', 'K', 'P', 'T', '0', '1'};

namespace detail {

// JSON has no literal for non-finite doubles (an untrained model's best
// validation loss is +inf), so those round-trip through strings.
inline nlohmann::json json_double(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

inline double double_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw std::runtime_error("checkpoint: unrecognized numeric literal \"" + s + "\"");
  }
  return j.get<double>();
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, const TrainedModel& model,
                            const nn::AdamState* adam = nullptr, uint64_t seed = 0) {
  nlohmann::ordered_json head;
  head["kind"] =
      model.net.kind() == nn::Network::Kind::Recognition ? "recognition" : "authentication";
  head["config"] = nn::config_to_json(model.net.config());
  head["standardizer"] = {{"mean", model.standardizer.mean}, {"stddev", model.standardizer.stddev}};
  head["metadata"] = {{"epochs_run", model.epochs_run},
                      {"best_epoch", model.best_epoch},
                      {"best_val_loss", detail::json_double(model.best_val_loss)},
                      {"final_lr", detail::json_double(model.final_lr)}};
  head["seed"] = seed;
  head["has_adam"] = adam != nullptr;
  if (adam) head["adam_step"] = adam->step;
  std::vector<nlohmann::json> shapes;
  const auto params = model.net.parameters();
  for (const auto& p : params) shapes.emplace_back(p.shape());
  head["param_shapes"] = shapes;
  const std::string header = head.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const uint64_t len = header.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& p : params) {
    out.write(reinterpret_cast<const char*>(p.value().data()),
              static_cast<std::streamsize>(p.value().size() * sizeof(double)));
  }
  if (adam) {
    for (const auto& m : adam->m) {
      out.write(reinterpret_cast<const char*>(m.data()),
                static_cast<std::streamsize>(m.size() * sizeof(double)));
    }
    for (const auto& v : adam->v) {
      out.write(reinterpret_cast<const char*>(v.data()),
                static_cast<std::streamsize>(v.size() * sizeof(double)));
    }
  }
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

struct LoadedCheckpoint {
  TrainedModel model;
  nn::AdamState adam;
  bool has_adam = false;
  uint64_t seed = 0;
};

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(magic, magic + sizeof(magic), kCheckpointMagic)) {
    throw std::runtime_error("load_checkpoint: " + path.string() + " is not a model checkpoint");
  }
  uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("load_checkpoint: truncated header in " + path.string());

  LoadedCheckpoint loaded;
  nlohmann::json head;
  try {
    head = nlohmann::json::parse(header);
    const nn::ModelConfig cfg = nn::config_from_json(head.at("config"));
    Rng rng(0);
    loaded.model.net = head.at("kind").get<std::string>() == "recognition"
                           ? nn::Network::build(cfg, rng)
                           : nn::Network::build_auth(cfg, rng);
    loaded.model.standardizer.mean = head.at("standardizer").at("mean").get<std::vector<double>>();
    loaded.model.standardizer.stddev =
        head.at("standardizer").at("stddev").get<std::vector<double>>();
    loaded.model.epochs_run = head.at("metadata").at("epochs_run").get<int>();
    loaded.model.best_epoch = head.at("metadata").at("best_epoch").get<int>();
    loaded.model.best_val_loss = detail::double_from_json(head.at("metadata").at("best_val_loss"));
    loaded.model.final_lr = detail::double_from_json(head.at("metadata").at("final_lr"));
    loaded.seed = head.at("seed").get<uint64_t>();
    loaded.has_adam = head.at("has_adam").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_checkpoint: malformed header in " + path.string() + ": " +
                             e.what());
  }

  auto params = loaded.model.net.parameters();
  const auto shapes = head.at("param_shapes");
  if (shapes.size() != params.size()) {
    throw std::runtime_error("load_checkpoint: parameter count mismatch in " + path.string());
  }
  for (size_t i = 0; i < params.size(); ++i) {
    if (shapes[i].get<std::vector<int>>() != params[i].shape()) {
      throw std::runtime_error("load_checkpoint: shape mismatch at parameter " + std::to_string(i));
    }
    in.read(reinterpret_cast<char*>(params[i].node()->value.data()),
            static_cast<std::streamsize>(params[i].numel() * sizeof(double)));
  }
  if (loaded.has_adam) {
    loaded.adam.reset(params);
    loaded.adam.step = head.at("adam_step").get<int64_t>();
    for (auto& m : loaded.adam.m) {
      in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    }
    for (auto& v : loaded.adam.v) {
      in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    }
  }
  if (!in) throw std::runtime_error("load_checkpoint: truncated parameter data in " + path.string());
  return loaded;
}

}  // namespace ws::eval
