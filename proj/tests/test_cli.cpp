#include <catch2/catch_amalgamated.hpp>

#include <ws/runners.hpp>

#include "helpers.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

using namespace ws;
using namespace ws::cli;
namespace fs = std::filesystem;

namespace {

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    return nlohmann::json::parse(in);
}

int count_lines(const std::string& text) {
    int n = 0;
    for (char c : text) {
        if (c == '\n') ++n;
    }
    return n;
}

// A small noiseless dataset: two subjects, one day, three activities.
fs::path make_small_dataset(const fs::path& dir, uint64_t seed,
                            std::vector<ActivityLabel> activities, double pad_to_s,
                            int days = 1) {
    synth::SynthOptions opt;
    opt.activities = std::move(activities);
    opt.pad_to_s = pad_to_s;
    opt.snr_db = std::nullopt;
    synth::generate_dataset(dir, 2, days, seed, opt);
    return dir;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(WS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("grid mode tokens round-trip") {
    CHECK(grid_mode_token(GridMode::UpperBound) == "upper-bound");
    CHECK(grid_mode_token(GridMode::Louo) == "louo");
    CHECK(parse_grid_mode("upper-bound") == GridMode::UpperBound);
    CHECK(parse_grid_mode("louo") == GridMode::Louo);
    CHECK_THROWS_AS(parse_grid_mode("global"), std::invalid_argument);
}

TEST_CASE("dataset synthesis runner writes a complete, reproducible manifest") {
    testutil::TempDir a("cli_synth_a");
    testutil::TempDir b("cli_synth_b");

    SynthCmd cmd;
    cmd.out = (a.path() / "data").string();
    cmd.subjects = 2;
    cmd.days = 1;
    cmd.seed = 5;
    cmd.noiseless = true;
    run_synth(cmd);

    const fs::path data(cmd.out);
    for (const char* name : {"S1_D1_wrist.csv", "S1_D1_wrist.json", "S1_D1_wrist.counts.json",
                             "S2_D1_wrist.csv", "S2_D1_wrist.json", "S2_D1_wrist.counts.json",
                             "run_manifest.json"}) {
        INFO(name);
        CHECK(fs::exists(data / name));
    }

    auto manifest = read_json(data / "run_manifest.json");
    REQUIRE(manifest.contains("argv"));
    CHECK(manifest["argv"][0] == "synth");
    CHECK(manifest["argv"].size() >= 10);
    std::vector<std::string> outputs = manifest["outputs"];
    CHECK(std::find(outputs.begin(), outputs.end(), "S2_D1_wrist.csv") != outputs.end());

    SynthCmd again = cmd;
    again.out = (b.path() / "data").string();
    run_synth(again);
    CHECK(testutil::slurp(data / "S1_D1_wrist.csv") ==
          testutil::slurp(fs::path(again.out) / "S1_D1_wrist.csv"));
    CHECK(testutil::slurp(data / "S1_D1_wrist.counts.json") ==
          testutil::slurp(fs::path(again.out) / "S1_D1_wrist.counts.json"));

    SynthCmd bad = cmd;
    bad.subjects = 1;
    CHECK_THROWS_MATCHES(run_synth(bad), std::invalid_argument,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("--subjects >= 2")));
}

TEST_CASE("counting runner reproduces noiseless ground truth") {
    testutil::TempDir tmp("cli_count");
    const auto data = make_small_dataset(
        tmp.path() / "data", 11,
        {ActivityLabel::Squat, ActivityLabel::Running, ActivityLabel::Armcurl}, 180.0);

    CountCmd cmd;
    cmd.data = data.string();
    cmd.out = (tmp.path() / "out").string();
    auto root = run_count(cmd);

    CHECK(root["command"] == "count");
    CHECK(root["grid_mode"] == "upper-bound");
    REQUIRE(root["positions"].size() == 1);
    CHECK(root["positions"][0]["position"] == "wrist");

    const auto& segments = root["positions"][0]["segments"];
    // 2 subjects × (3 Squat sets + 3 Armcurl sets + 1 Running stretch).
    REQUIRE(segments.size() == 14);
    for (const auto& seg : segments) {
        INFO(seg.dump());
        CHECK(seg["acc_accuracy"].get<double>() == 1.0);
        CHECK(seg["gyro_accuracy"].get<double>() == 1.0);
        CHECK(seg["hbc_accuracy"].get<double>() == 1.0);
        CHECK(seg["imu_accuracy"].get<double>() == 1.0);
        CHECK(seg["combined_accuracy"].get<double>() == 1.0);
        CHECK(seg["acc"].get<int>() == seg["true_count"].get<int>());
    }

    const fs::path out(cmd.out);
    const std::string boxplot = testutil::slurp(out / "counting_wrist_boxplot.csv");
    CHECK(boxplot.rfind("activity,source,accuracy\n", 0) == 0);
    CHECK(count_lines(boxplot) == 1 + 5 * static_cast<int>(segments.size()));

    const std::string summary = testutil::slurp(out / "counting_wrist_summary.csv");
    CHECK(summary.rfind("activity,segments,acc,gyro,hbc,imu,combined\n", 0) == 0);
    CHECK(summary.find("\nall,14,") != std::string::npos);

    const std::string detail = testutil::slurp(out / "counting_wrist_detail.csv");
    CHECK(detail.rfind("subject,day,position,activity,true_count,", 0) == 0);
    CHECK(count_lines(detail) == 1 + static_cast<int>(segments.size()));

    SECTION("a second run is byte-identical") {
        CountCmd rerun = cmd;
        rerun.out = (tmp.path() / "out2").string();
        run_count(rerun);
        CHECK(testutil::slurp(out / "report.json") ==
              testutil::slurp(fs::path(rerun.out) / "report.json"));
    }

    SECTION("rotating tuning subjects still counts a clean signal exactly") {
        CountCmd louo = cmd;
        louo.out = (tmp.path() / "out_louo").string();
        louo.grid_mode = GridMode::Louo;
        auto louo_root = run_count(louo);
        CHECK(louo_root["grid_mode"] == "louo");
        for (const auto& seg : louo_root["positions"][0]["segments"]) {
            CHECK(seg["combined_accuracy"].get<double>() == 1.0);
        }
    }
}

TEST_CASE("counting runner demands a repetition-count sidecar") {
    testutil::TempDir tmp("cli_count_bad");
    const auto data = make_small_dataset(tmp.path() / "data", 13, {ActivityLabel::Squat}, 90.0);
    fs::remove(data / "S1_D1_wrist.counts.json");

    CountCmd cmd;
    cmd.data = data.string();
    cmd.out = (tmp.path() / "out").string();
    CHECK_THROWS_MATCHES(run_count(cmd), std::invalid_argument,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                             "has no repetition-count sidecar")));
}

TEST_CASE("evaluation runner emits one entry per position and source") {
    testutil::TempDir tmp("cli_eval");
    const auto data = make_small_dataset(tmp.path() / "data", 17,
                                         {ActivityLabel::Squat, ActivityLabel::Running}, 120.0);

    EvalCmd cmd;
    cmd.data = data.string();
    cmd.out = (tmp.path() / "out").string();
    cmd.sources = {dataio::Source::Hbc};
    cmd.seed = 3;
    cmd.epochs = 3;
    cmd.patience = 2;
    cmd.batch = 64;
    cmd.lr_initial = 1e-3;
    auto root = run_eval(cmd);

    CHECK(root["command"] == "eval");
    CHECK(root["seed"] == 3);
    CHECK(root["train"]["max_epochs"] == 3);
    REQUIRE(root["configurations"].size() == 1);
    const auto& entry = root["configurations"][0];
    CHECK(entry["position"] == "wrist");
    CHECK(entry["source"] == "hbc");
    CHECK(entry["n_subjects"] == 2);
    CHECK(entry["aggregate"]["total"].get<int>() == entry["n_windows"].get<int>());
    const double acc = entry["aggregate"]["accuracy"].get<double>();
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
    REQUIRE(entry["folds"].size() == 2);
    CHECK(entry["folds"][0]["held_out"] == "subject_1");
    CHECK(entry["folds"][1]["held_out"] == "subject_2");

    const fs::path out(cmd.out);
    CHECK(fs::exists(out / "report.json"));
    CHECK(fs::exists(out / "confusion_wrist_hbc.csv"));
    CHECK(fs::exists(out / "confusion_wrist_hbc.svg"));
    CHECK(fs::exists(out / "run_manifest.json"));

    const std::string csv = testutil::slurp(out / "confusion_wrist_hbc.csv");
    CHECK(csv.rfind("true_class,Adductor,", 0) == 0);
    CHECK(count_lines(csv) == 1 + kNumActivities);
    const std::string svg = testutil::slurp(out / "confusion_wrist_hbc.svg");
    CHECK(svg.find("<svg") != std::string::npos);

    SECTION("a rerun with the same seed is byte-identical") {
        EvalCmd rerun = cmd;
        rerun.out = (tmp.path() / "out2").string();
        run_eval(rerun);
        CHECK(testutil::slurp(out / "report.json") ==
              testutil::slurp(fs::path(rerun.out) / "report.json"));
    }

    SECTION("asking for no source is an error") {
        EvalCmd bad = cmd;
        bad.sources.clear();
        CHECK_THROWS_AS(run_eval(bad), std::invalid_argument);
    }

    SECTION("an empty data directory is an error") {
        EvalCmd bad = cmd;
        bad.data = (tmp.path() / "nothing").string();
        fs::create_directories(bad.data);
        CHECK_THROWS_AS(run_eval(bad), std::exception);
    }
}

TEST_CASE("authentication runner holds out recording days") {
    testutil::TempDir tmp("cli_auth");
    const auto data =
        make_small_dataset(tmp.path() / "data", 19, {ActivityLabel::Running}, 60.0, 2);

    AuthCmd cmd;
    cmd.data = data.string();
    cmd.out = (tmp.path() / "out").string();
    cmd.source = dataio::Source::Hbc;
    cmd.seed = 9;
    cmd.epochs = 6;
    cmd.patience = 3;
    cmd.batch = 32;
    cmd.lr_initial = 3e-3;
    auto root = run_auth_cmd(cmd);

    CHECK(root["command"] == "auth");
    CHECK(root["source"] == "hbc");
    CHECK(root["activity"] == "Running");
    REQUIRE(root["configurations"].size() == 1);
    const auto& entry = root["configurations"][0];
    CHECK(entry["position"] == "wrist");
    REQUIRE(entry["folds"].size() == 2);
    CHECK(entry["folds"][0]["held_out"] == "day_1");
    CHECK(entry["folds"][1]["held_out"] == "day_2");

    const fs::path out(cmd.out);
    CHECK(fs::exists(out / "confusion_auth_wrist_hbc.csv"));
    CHECK(fs::exists(out / "confusion_auth_wrist_hbc.svg"));
    const std::string csv = testutil::slurp(out / "confusion_auth_wrist_hbc.csv");
    CHECK(csv.rfind("true_class,S1,S2,", 0) == 0);
}

TEST_CASE("command-line binary runs end to end") {
    testutil::TempDir tmp("cli_bin");
    const fs::path data = tmp.path() / "data";
    const fs::path out = tmp.path() / "out";

    REQUIRE(run_cli("synth --out " + data.string() +
                    " --subjects 2 --days 1 --seed 4 --noiseless") == 0);
    CHECK(fs::exists(data / "S1_D1_wrist.csv"));
    CHECK(fs::exists(data / "run_manifest.json"));

    CHECK(run_cli("count --data " + data.string() + " --out " + out.string()) == 0);
    CHECK(fs::exists(out / "report.json"));
    CHECK(fs::exists(out / "counting_wrist_summary.csv"));

    SECTION("failure paths exit nonzero") {
        CHECK(run_cli("synth --out " + (tmp.path() / "x").string() + " --subjects 1") != 0);
        CHECK(run_cli("definitely-not-a-subcommand") != 0);
        CHECK(run_cli("count --data " + (tmp.path() / "missing").string() + " --out " +
                      (tmp.path() / "y").string()) != 0);
        CHECK(run_cli("auth --data " + data.string() + " --out " + (tmp.path() / "z").string() +
                      " --activity Jogging") != 0);
    }
}
