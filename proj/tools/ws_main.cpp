// Command-line front end: synthesize datasets, train/evaluate recognition,
// count repetitions, and run user authentication.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "ws/runners.hpp"

namespace {

ws::Position position_from(const std::string& tok) {
  const auto p = ws::parse_position(tok);
  if (!p) throw CLI::ValidationError("--position", "unknown position '" + tok + "'");
  return *p;
}

ws::dataio::Source source_from(const std::string& tok) {
  try {
    return ws::dataio::parse_source(tok);
  } catch (const std::exception& e) {
    throw CLI::ValidationError("--source", e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Workout sensing toolkit: synthetic data, recognition, counting, authentication"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic labeled dataset");
  ws::cli::SynthCmd synth_cmd;
  std::string synth_position = "wrist";
  synth->add_option("--out", synth_cmd.out, "Output dataset directory")->required();
  synth->add_option("--subjects", synth_cmd.subjects, "Number of subjects (>= 2)");
  synth->add_option("--days", synth_cmd.days, "Recording days per subject");
  synth->add_option("--seed", synth_cmd.seed, "Generator seed");
  synth->add_option("--position", synth_position, "Wearing position (wrist|leg|pocket)");
  synth->add_option("--snr", synth_cmd.snr_db, "Signal-to-noise ratio in dB");
  synth->add_flag("--noiseless", synth_cmd.noiseless, "Disable the noise pass entirely");

  // eval
  auto* eval = app.add_subcommand("eval", "Leave-one-user-out recognition training/evaluation");
  ws::cli::EvalCmd eval_cmd;
  std::string eval_position;
  std::vector<std::string> eval_sources;
  eval->add_option("--data", eval_cmd.data, "Dataset directory")->required();
  eval->add_option("--out", eval_cmd.out, "Report output directory")->required();
  eval->add_option("--position", eval_position, "Restrict to one wearing position");
  eval->add_option("--source", eval_sources, "Signal sources (hbc|imu|combined); default all");
  eval->add_option("--seed", eval_cmd.seed, "Training seed");
  eval->add_option("--epochs", eval_cmd.epochs, "Maximum training epochs");
  eval->add_option("--patience", eval_cmd.patience, "Early-stopping patience");
  eval->add_option("--batch", eval_cmd.batch, "Mini-batch size");
  eval->add_option("--lr", eval_cmd.lr_initial, "Initial learning rate");

  // count
  auto* count = app.add_subcommand("count", "Repetition counting with grid-searched peak params");
  ws::cli::CountCmd count_cmd;
  std::string count_position;
  std::string count_mode = "upper-bound";
  count->add_option("--data", count_cmd.data, "Dataset directory with count sidecars")->required();
  count->add_option("--out", count_cmd.out, "Report output directory")->required();
  count->add_option("--position", count_position, "Restrict to one wearing position");
  count->add_option("--grid-mode", count_mode, "Peak-parameter tuning mode (upper-bound|louo)");

  // auth
  auto* auth = app.add_subcommand("auth", "User authentication from one activity's windows");
  ws::cli::AuthCmd auth_cmd;
  std::string auth_position;
  std::string auth_source = "combined";
  std::string auth_activity = "Running";
  auth->add_option("--data", auth_cmd.data, "Dataset directory")->required();
  auth->add_option("--out", auth_cmd.out, "Report output directory")->required();
  auth->add_option("--position", auth_position, "Restrict to one wearing position");
  auth->add_option("--source", auth_source, "Signal source (hbc|imu|combined)");
  auth->add_option("--activity", auth_activity, "Activity whose windows identify the subject");
  auth->add_option("--seed", auth_cmd.seed, "Training seed");
  auth->add_option("--epochs", auth_cmd.epochs, "Maximum training epochs");
  auth->add_option("--patience", auth_cmd.patience, "Early-stopping patience");
  auth->add_option("--batch", auth_cmd.batch, "Mini-batch size");
  auth->add_option("--lr", auth_cmd.lr_initial, "Initial learning rate");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      synth_cmd.position = position_from(synth_position);
      ws::cli::run_synth(synth_cmd);
      std::printf("dataset written to %s\n", synth_cmd.out.c_str());
    } else if (eval->parsed()) {
      if (!eval_position.empty()) eval_cmd.position = position_from(eval_position);
      if (!eval_sources.empty()) {
        eval_cmd.sources.clear();
        for (const auto& s : eval_sources) eval_cmd.sources.push_back(source_from(s));
      }
      ws::cli::run_eval(eval_cmd);
      std::printf("recognition report written to %s\n", eval_cmd.out.c_str());
    } else if (count->parsed()) {
      if (!count_position.empty()) count_cmd.position = position_from(count_position);
      count_cmd.grid_mode = ws::cli::parse_grid_mode(count_mode);
      ws::cli::run_count(count_cmd);
      std::printf("counting report written to %s\n", count_cmd.out.c_str());
    } else if (auth->parsed()) {
      if (!auth_position.empty()) auth_cmd.position = position_from(auth_position);
      auth_cmd.source = source_from(auth_source);
      const auto act = ws::parse_label(auth_activity);
      if (!act) {
        std::fprintf(stderr, "error: unknown activity '%s'\n", auth_activity.c_str());
        return 2;
      }
      auth_cmd.activity = *act;
      ws::cli::run_auth_cmd(auth_cmd);
      std::printf("authentication report written to %s\n", auth_cmd.out.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
