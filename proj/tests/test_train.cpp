#include <catch2/catch_amalgamated.hpp>

#include <ws/metrics.hpp>
#include <ws/model.hpp>
#include <ws/train.hpp>

#include "helpers.hpp"

#include <cmath>
#include <numbers>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

using namespace ws;
using namespace ws::eval;
using dataio::Source;
using dataio::WindowInstance;

namespace {

WindowInstance make_window(int len, ActivityLabel label, int subject, int day,
                           const std::function<double(int, int)>& fn) {
    WindowInstance w;
    w.label = label;
    w.subject_id = subject;
    w.day = day;
    w.channels.assign(7, std::vector<double>(static_cast<size_t>(len), 0.0));
    for (int c = 0; c < 7; ++c) {
        for (int t = 0; t < len; ++t) w.channels[c][t] = fn(c, t);
    }
    return w;
}

// A deliberately small architecture for fast training tests; the kernel
// width stays tied to the 20 Hz sampling rate, everything else shrinks.
nn::ModelConfig tiny_config(Source source) {
    nn::ModelConfig cfg;
    cfg.source = source;
    cfg.window_len = 16;
    cfg.conv1_filters = 8;
    cfg.depth_multiplier = 2;
    cfg.conv3_filters = 16;
    cfg.dilated_filters = 8;
    cfg.validate();
    return cfg;
}

// Two trivially separable activities on the capacitive channel: Squat
// windows oscillate, Null windows are flat. Noise keeps windows distinct.
std::vector<WindowInstance> separable_activity_windows(int per_class_per_subject,
                                                       uint64_t seed) {
    std::vector<WindowInstance> out;
    Rng rng(seed);
    for (int subject : {1, 2}) {
        for (int i = 0; i < per_class_per_subject; ++i) {
            const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
            out.push_back(make_window(16, ActivityLabel::Squat, subject, 1,
                                      [&](int c, int t) {
                                          if (c != 0) return 0.01 * rng.normal();
                                          return std::sin(2.0 * std::numbers::pi * 1.25 * t / 20.0 +
                                                          phase) +
                                                 0.05 * rng.normal();
                                      }));
            out.push_back(make_window(16, ActivityLabel::Null, subject, 1, [&](int c, int) {
                return c == 0 ? 0.05 * rng.normal() : 0.01 * rng.normal();
            }));
        }
    }
    return out;
}

std::vector<const WindowInstance*> pointers(const std::vector<WindowInstance>& v) {
    std::vector<const WindowInstance*> out;
    out.reserve(v.size());
    for (const auto& w : v) out.push_back(&w);
    return out;
}

}  // namespace

TEST_CASE("classification metrics match hand-computed values") {
    SECTION("perfect predictions") {
        auto m = compute_metrics({0, 1, 2, 0}, {0, 1, 2, 0}, 3);
        CHECK(m.accuracy == 1.0);
        CHECK(m.macro_f1 == 1.0);
        CHECK(m.correct == 4);
        CHECK(m.support == std::vector<int64_t>{2, 1, 1});
    }

    SECTION("worked two-class example") {
        // preds A A B B vs labels A B B B.
        auto m = compute_metrics({0, 0, 1, 1}, {0, 1, 1, 1}, 2);
        CHECK(m.accuracy == 0.75);
        CHECK(std::abs(m.precision[0] - 0.5) <= 1e-15);
        CHECK(std::abs(m.recall[0] - 1.0) <= 1e-15);
        CHECK(std::abs(m.f1[0] - 2.0 / 3.0) <= 1e-15);
        CHECK(std::abs(m.precision[1] - 1.0) <= 1e-15);
        CHECK(std::abs(m.recall[1] - 2.0 / 3.0) <= 1e-15);
        CHECK(std::abs(m.f1[1] - 0.8) <= 1e-15);
        CHECK(std::abs(m.macro_f1 - 11.0 / 15.0) <= 1e-15);

        CHECK(m.confusion_counts[0] == std::vector<int64_t>{1, 0});
        CHECK(m.confusion_counts[1] == std::vector<int64_t>{1, 2});
        CHECK(std::abs(m.confusion[1][0] - 1.0 / 3.0) <= 1e-15);
        CHECK(std::abs(m.confusion[1][1] - 2.0 / 3.0) <= 1e-15);

        int64_t sum = 0;
        for (const auto& row : m.confusion_counts) {
            for (int64_t v : row) sum += v;
        }
        CHECK(sum == m.total);
    }

    SECTION("absent classes do not dilute macro F1") {
        auto m = compute_metrics({0, 1}, {0, 1}, 5);
        CHECK(m.macro_f1 == 1.0);
    }

    SECTION("input validation") {
        CHECK_THROWS_AS(compute_metrics({0}, {0, 1}, 2), std::invalid_argument);
        CHECK_THROWS_AS(compute_metrics({}, {}, 2), std::invalid_argument);
        CHECK_THROWS_AS(compute_metrics({2}, {0}, 2), std::invalid_argument);
        CHECK_THROWS_AS(compute_metrics({0}, {-1}, 2), std::invalid_argument);
    }
}

TEST_CASE("balanced class weights follow inverse frequency") {
    auto w = detail::target_weights({0, 0, 0, 1});
    CHECK(std::abs(w[0] - 4.0 / 6.0) <= 1e-15);
    CHECK(std::abs(w[1] - 2.0) <= 1e-15);

    auto even = detail::target_weights({3, 4});
    CHECK(even[3] == 1.0);
    CHECK(even[4] == 1.0);

    auto solo = detail::target_weights({7, 7, 7});
    CHECK(solo[7] == 1.0);

    // Total weighted mass equals the sample count.
    Rng rng(5);
    std::vector<int> targets;
    for (int i = 0; i < 500; ++i) targets.push_back(static_cast<int>(rng.below(4)));
    auto weights = detail::target_weights(targets);
    double mass = 0.0;
    for (int t : targets) mass += weights[t];
    CHECK(std::abs(mass - 500.0) <= 1e-9);
}

TEST_CASE("standardization uses dataset-wide per-channel statistics") {
    std::vector<WindowInstance> windows;
    windows.push_back(make_window(4, ActivityLabel::Null, 1, 1,
                                  [](int c, int) { return c == 0 ? 1.0 : 5.0; }));
    windows.push_back(make_window(4, ActivityLabel::Null, 1, 1,
                                  [](int c, int) { return c == 0 ? 3.0 : 5.0; }));
    auto ptrs = pointers(windows);

    SECTION("capacitive channel only") {
        auto st = Standardizer::fit(ptrs, Source::Hbc);
        REQUIRE(st.mean.size() == 1);
        CHECK(st.mean[0] == 2.0);
        CHECK(st.stddev[0] == 1.0);

        std::vector<size_t> order{0, 1};
        auto batch = detail::make_batch(ptrs, order, 0, 2, st, Source::Hbc, 4);
        REQUIRE(batch.shape() == std::vector<int>{2, 1, 4});
        for (int t = 0; t < 4; ++t) {
            CHECK(batch.value()[t] == -1.0);
            CHECK(batch.value()[4 + t] == 1.0);
        }
        CHECK_FALSE(batch.requires_grad());
    }

    SECTION("constant channels fall back to unit scale") {
        auto st = Standardizer::fit(ptrs, Source::Imu);
        REQUIRE(st.mean.size() == 6);
        for (int c = 0; c < 6; ++c) {
            CHECK(st.mean[c] == 5.0);
            CHECK(st.stddev[c] == 1.0);  // zero variance guard
        }
        std::vector<size_t> order{0, 1};
        auto batch = detail::make_batch(ptrs, order, 0, 2, st, Source::Imu, 4);
        REQUIRE(batch.shape() == std::vector<int>{2, 6, 4});
        for (double v : batch.value()) CHECK(v == 0.0);
    }

    SECTION("the inertial view skips the capacitive row") {
        auto st = Standardizer::fit(ptrs, Source::Imu);
        CHECK(st.mean[0] == 5.0);  // channel 1 of the window, not the hbc row
    }

    CHECK_THROWS_AS(Standardizer::fit({}, Source::Hbc), std::invalid_argument);
}

TEST_CASE("training spec validation") {
    TrainSpec spec;
    CHECK_NOTHROW(spec.validate());

    TrainSpec bad = spec;
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = spec;
    bad.patience = bad.max_epochs;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = spec;
    bad.val_fraction = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = spec;
    bad.val_fraction = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("training separates two trivially distinct activities") {
    auto windows = separable_activity_windows(30, 101);
    auto cfg = tiny_config(Source::Hbc);

    TrainSpec spec;
    spec.max_epochs = 50;
    spec.patience = 10;
    spec.batch_size = 32;
    spec.lr.initial = 1e-3;
    spec.seed = 7;

    auto model = train_fold(cfg, pointers(windows), spec);
    CHECK(model.epochs_run >= 1);
    CHECK(model.epochs_run <= 50);
    CHECK(model.best_epoch >= 1);
    CHECK(model.best_val_loss < std::numeric_limits<double>::infinity());
    CHECK(model.final_lr > 0.0);

    auto preds = predict(model, pointers(windows), 64);
    int correct = 0;
    for (size_t i = 0; i < windows.size(); ++i) {
        if (preds[i] == static_cast<int>(windows[i].label)) ++correct;
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(windows.size());
    CHECK(acc >= 0.99);
}

TEST_CASE("early stopping waits exactly `patience` epochs without improvement") {
    // A learning rate of 1e-30 makes every update a no-op, so the validation
    // loss can never improve after the first epoch.
    auto windows = separable_activity_windows(4, 55);
    auto cfg = tiny_config(Source::Hbc);

    TrainSpec spec;
    spec.max_epochs = 20;
    spec.patience = 3;
    spec.batch_size = 8;
    spec.lr.initial = 1e-30;
    spec.seed = 9;

    auto model = train_fold(cfg, pointers(windows), spec);
    CHECK(model.epochs_run == 1 + spec.patience);
    CHECK(model.best_epoch == 1);
}

TEST_CASE("training is bit-reproducible for a fixed seed") {
    auto windows = separable_activity_windows(6, 77);
    auto cfg = tiny_config(Source::Hbc);

    TrainSpec spec;
    spec.max_epochs = 4;
    spec.patience = 3;
    spec.batch_size = 16;
    spec.lr.initial = 1e-3;
    spec.seed = 13;

    auto a = train_fold(cfg, pointers(windows), spec);
    auto b = train_fold(cfg, pointers(windows), spec);

    CHECK(a.epochs_run == b.epochs_run);
    CHECK(a.best_epoch == b.best_epoch);
    CHECK(a.best_val_loss == b.best_val_loss);

    auto pa = a.net.parameters();
    auto pb = b.net.parameters();
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].value() == pb[i].value());
    }
    CHECK(predict(a, pointers(windows)) == predict(b, pointers(windows)));

    TrainSpec other = spec;
    other.seed = 14;
    auto c = train_fold(cfg, pointers(windows), other);
    bool differs = false;
    auto pc = c.net.parameters();
    for (size_t i = 0; i < pa.size() && !differs; ++i) {
        if (pa[i].value() != pc[i].value()) differs = true;
    }
    CHECK(differs);
}

TEST_CASE("train_fold input validation") {
    auto cfg = tiny_config(Source::Hbc);
    TrainSpec spec;
    spec.max_epochs = 2;
    spec.patience = 1;

    CHECK_THROWS_AS(train_fold(cfg, {}, spec), std::invalid_argument);

    auto windows = separable_activity_windows(2, 3);
    auto only_one = std::vector<const WindowInstance*>{&windows[0]};
    CHECK_THROWS_AS(train_fold(cfg, only_one, spec), std::invalid_argument);
}

TEST_CASE("leave-one-user-out evaluation pools per-subject folds") {
    auto windows = separable_activity_windows(15, 303);
    auto cfg = tiny_config(Source::Hbc);

    // Each fold trains on one subject's 30 windows; at batch 16 that is two
    // optimizer steps per epoch, enough to fit well inside the epoch budget.
    TrainSpec spec;
    spec.max_epochs = 80;
    spec.patience = 20;
    spec.batch_size = 16;
    spec.lr.initial = 1e-3;
    spec.seed = 21;

    auto report = run_louo(windows, cfg, spec);
    REQUIRE(report.folds.size() == 2);
    CHECK(report.folds[0].held_out == "subject_1");
    CHECK(report.folds[1].held_out == "subject_2");
    CHECK(report.aggregate.total == static_cast<int64_t>(windows.size()));

    int64_t fold_total = 0;
    double fold_acc = 0.0;
    for (const auto& f : report.folds) {
        fold_total += f.metrics.total;
        fold_acc += f.metrics.accuracy;
        CHECK(f.epochs_run >= 1);
    }
    CHECK(fold_total == report.aggregate.total);
    CHECK(std::abs(report.fold_mean_accuracy - fold_acc / 2.0) <= 1e-15);
    CHECK(report.aggregate.accuracy >= 0.99);
}

TEST_CASE("user authentication holds out whole recording days") {
    // Two subjects with different amplitude and offset on the capacitive
    // channel; constant across days, so day-held-out identification works.
    std::vector<WindowInstance> windows;
    Rng rng(404);
    for (int subject : {1, 2}) {
        const double amp = subject == 1 ? 0.6 : 1.4;
        const double offset = subject == 1 ? 1.0 : 3.0;
        for (int day : {1, 2}) {
            for (int i = 0; i < 10; ++i) {
                const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
                windows.push_back(make_window(
                    80, ActivityLabel::Running, subject, day, [&](int c, int t) {
                        if (c != 0) return 0.01 * rng.normal();
                        return offset +
                               amp * std::sin(2.0 * std::numbers::pi * 2.4 * t / 20.0 + phase) +
                               0.02 * rng.normal();
                    }));
            }
        }
    }

    TrainSpec spec;
    spec.max_epochs = 12;
    spec.patience = 4;
    spec.batch_size = 20;
    spec.lr.initial = 3e-3;
    spec.seed = 31;

    auto report = run_auth(windows, Source::Hbc, spec);
    REQUIRE(report.folds.size() == 2);
    std::set<std::string> names;
    for (const auto& f : report.folds) names.insert(f.held_out);
    CHECK(names == std::set<std::string>{"day_1", "day_2"});
    CHECK(report.aggregate.total == static_cast<int64_t>(windows.size()));
    CHECK(report.aggregate.accuracy >= 0.99);

    SECTION("requesting an activity that never occurs fails loudly") {
        CHECK_THROWS_MATCHES(run_auth(windows, Source::Hbc, spec, ActivityLabel::Squat),
                             std::invalid_argument,
                             Catch::Matchers::MessageMatches(
                                 Catch::Matchers::ContainsSubstring("no windows labeled Squat")));
    }

    SECTION("a single recording day cannot be held out") {
        std::vector<WindowInstance> one_day;
        for (const auto& w : windows) {
            if (w.day == 1) one_day.push_back(w);
        }
        CHECK_THROWS_AS(run_auth(one_day, Source::Hbc, spec), std::invalid_argument);
    }

    SECTION("subjects outside the class domain are rejected") {
        auto bad = windows;
        bad[0].subject_id = 11;
        CHECK_THROWS_AS(run_auth(bad, Source::Hbc, spec), std::invalid_argument);
    }
}
