#pragma once
#include <iosfwd>
#include <string>

#include "twinbeam/config.hpp"

namespace twinbeam {

/// Exit statuses shared by the runner entry points and the CLI:
/// 0 success, 1 error, 2 empty or degenerate input.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitEmpty = 2;

/// Generate a sample-free batch, calibrate, write
/// <output.dir>/calibration.txt and print the measured noise reduction
/// factor plus the heralding-equivalent efficiency (1 - sigma).
int run_calibrate(const RunConfig& config, std::ostream& out, int threads = 1);

/// Full absorption sweep: calibrate from the config's seed lineage, then for
/// every alpha set point run the series protocol with per-series drift
/// correction and both estimators, and emit <output.dir>/report.csv plus one
/// histogram data file per set point. Output is identical for any thread
/// count. Alpha set points are dispatched as parallel jobs; a single
/// collector writes rows in grid order.
int run_sweep(const RunConfig& config, std::ostream& out, int threads = 1);

/// Summarize a sweep CSV as a table, flagging rows whose advantage clears
/// flag_threshold standard errors (gamma - 1 > threshold * gamma_err).
/// Returns kExitEmpty for a CSV with a valid header and no rows.
int run_report(const std::string& csv_path, double flag_threshold,
               std::ostream& out);

} // namespace twinbeam
