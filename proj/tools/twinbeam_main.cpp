#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "twinbeam/config.hpp"
#include "twinbeam/errors.hpp"
#include "twinbeam/runner.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> camera; // "on" or "off"
  int threads = 0;                   // 0 selects hardware concurrency
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "run configuration file")
      ->required();
  cmd->add_option("--seed", flags.seed, "override the config's master seed");
  cmd->add_option("--out", flags.out_dir, "override the output directory");
  cmd->add_option("--camera", flags.camera,
                  "force the camera pixel pipeline on or off")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--threads", flags.threads,
                  "worker threads (0 = hardware concurrency)");
}

twinbeam::RunConfig load_with_overrides(const CommonFlags& flags) {
  twinbeam::RunConfig cfg = twinbeam::load_config(flags.config_path);
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.out_dir) cfg.output_dir = *flags.out_dir;
  if (flags.camera) cfg.camera_enabled = (*flags.camera == "on");
  twinbeam::validate(cfg);
  return cfg;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"twin-beam absorption measurement simulation and analysis"};
  app.require_subcommand(1);

  CommonFlags calibrate_flags;
  CLI::App* calibrate =
      app.add_subcommand("calibrate", "record a sample-free reference batch and "
                                      "write the calibration constants");
  add_common(calibrate, calibrate_flags);

  CommonFlags sweep_flags;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "sweep the absorption set points and write report.csv plus "
               "histogram data");
  add_common(sweep, sweep_flags);

  std::string report_csv;
  double report_threshold = 3.0;
  CLI::App* report =
      app.add_subcommand("report", "summarize a sweep CSV as a table");
  report->add_option("csv", report_csv, "path to a sweep report.csv")->required();
  report->add_option("--threshold", report_threshold,
                     "standard errors above 1 required to flag an advantage");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? twinbeam::kExitOk : twinbeam::kExitError;
  }

  try {
    if (calibrate->parsed())
      return twinbeam::run_calibrate(load_with_overrides(calibrate_flags),
                                     std::cout, calibrate_flags.threads);
    if (sweep->parsed())
      return twinbeam::run_sweep(load_with_overrides(sweep_flags), std::cout,
                                 sweep_flags.threads);
    if (report->parsed())
      return twinbeam::run_report(report_csv, report_threshold, std::cout);
  } catch (const twinbeam::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return twinbeam::kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return twinbeam::kExitError;
  }
  return twinbeam::kExitError;
}
