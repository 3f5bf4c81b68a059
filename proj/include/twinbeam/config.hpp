#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "twinbeam/analysis.hpp"
#include "twinbeam/types.hpp"

namespace twinbeam {

/// Everything one experiment run needs. Parsed from line-oriented
/// "dotted.key = value" text; '#' starts a comment. Parsing is total:
/// unknown keys, malformed values and out-of-range parameters all raise
/// ConfigurationError naming the key, never a crash mid-run.
///
/// Required keys: source.mu, source.eta1, source.eta2, seed.
/// Everything else falls back to the defaults below.
struct RunConfig {
  SourceParams source;
  CameraParams camera;
  bool camera_enabled = false;
  SpotGeometry geometry;
  std::vector<double> alpha_list = {0.00599, 0.05, 0.1, 0.2, 0.3,
                                    0.4,     0.5,  0.6, 0.7, 0.8, 0.9};
  SeriesProtocol protocol; // 10 series x 100 acquisitions
  double eta_d = 0.90;     ///< detection efficiency of the classical baseline
  double eta_d_err = 0.0;  ///< relative uncertainty folded into gamma_err
  std::uint64_t seed = 0;
  std::string output_dir = ".";
  std::size_t calibration_frames = 100000;
  double roi_half_width_sigmas = 2.5; ///< ROI half width; 5.0 selects the wide reading
  std::size_t baseline_mc_frames = 20000;
  double flag_threshold = 3.0; ///< report flags gamma - 1 > threshold * gamma_err
};

/// Parse and fully validate. The optional `where` tag (usually the file
/// name) prefixes error messages.
RunConfig parse_config_text(const std::string& text, const std::string& where = "");
RunConfig load_config(const std::string& path);

/// Re-validate a config assembled or mutated in code (e.g. after CLI
/// overrides). Throws ConfigurationError naming the field.
void validate(const RunConfig& config);

} // namespace twinbeam
