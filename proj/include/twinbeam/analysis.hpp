#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "twinbeam/estimators.hpp"
#include "twinbeam/types.hpp"

namespace twinbeam {

struct SeriesProtocol {
  std::size_t n_series = 10;
  std::size_t frames_per_series = 100;
};

struct SeriesStats {
  double var_mean = 0.0;   ///< mean of the per-series unbiased variances
  double var_err = 0.0;    ///< sd of the per-series variances / sqrt(n_series)
  double alpha_mean = 0.0; ///< grand mean over all estimates
};

/// One swept absorption set point with everything the report CSV carries.
struct PerformanceReport {
  double alpha_true = 0.0;
  double alpha_mean = 0.0;
  double var_direct = 0.0;
  double var_exp = 0.0;       ///< measured variance of the corrected estimator
  double var_exp_err = 0.0;
  double var_cl = 0.0;        ///< ideal classical baseline (var_cl_ideal column)
  double var_cl_detected = 0.0;
  double var_cl_differential = 0.0;
  double gamma = 0.0;         ///< var_cl / var_exp
  double gamma_err = 0.0;
  double exposure_ratio = 0.0;
};

struct GaussianFitSummary {
  double mean = 0.0;
  double sd = 0.0;
  double amplitude = 0.0;
};

struct BaselineCurves {
  std::vector<double> ideal;        ///< perfect classical scheme
  std::vector<double> detected;     ///< same scheme behind eta_d detection
  std::vector<double> differential; ///< 50:50 split reference, Monte Carlo
};

/// Var(n1 - n2) / (mean(n1) + mean(n2)), unbiased variance and batch means.
/// 1 for independent Poisson arms, 0 for perfect correlation.
double noise_reduction_factor(const FrameBatch& batch);

/// Variance of the ideal classical direct measurement that sends the same
/// number of probe photons through the sample: (1 - alpha) * eta_d / n1p_mean,
/// where n1p_mean is the detected sample-free mean at efficiency eta_d.
double snl_variance(double alpha, double eta_d, double n1p_mean);

/// Advantage ratio var_cl / var_exp; above 1 the measured scheme beats the
/// ideal classical one per probe photon.
double gamma_ratio(double var_cl, double var_exp);

/// Probe photons needed relative to the ideal classical scheme for equal
/// precision: 1 / gamma.
double exposure_ratio(double gamma);

/// Split the estimates into protocol.n_series consecutive series, take the
/// unbiased variance of each, and report their mean, its scatter-derived
/// uncertainty and the grand mean. Length must equal
/// n_series * frames_per_series.
SeriesStats series_statistics(const std::vector<AbsorptionEstimate>& estimates,
                              const SeriesProtocol& protocol);

/// Bin count from the Freedman-Diaconis rule (2*IQR/n^(1/3) bin width),
/// clamped to [5, 400]; robust against the unclamped outliers absorption
/// estimates can produce.
std::size_t freedman_diaconis_bins(const std::vector<double>& values);

/// Histogram the estimates and least-squares fit a Gaussian to the bin
/// counts. The binned overload requires n_bins >= 5; the other picks a
/// Freedman-Diaconis bin width. Needs >= 100 estimates.
GaussianFitSummary fit_gaussian(const std::vector<AbsorptionEstimate>& estimates,
                                std::size_t n_bins);
GaussianFitSummary fit_gaussian(const std::vector<AbsorptionEstimate>& estimates);

/// Classical reference variances on a grid of absorption values. The first
/// two are closed-form; the differential curve simulates two independent
/// Poisson beams with the same detected means and the balanced gain k = 1,
/// using mc_frames acquisitions per grid point with streams derived from
/// seed.
BaselineCurves baseline_curves(const std::vector<double>& alpha_grid,
                               double eta_d, double n1p_mean, std::uint64_t seed,
                               std::size_t mc_frames = 20000);

/// CSV with the fixed column set, in order: alpha_true, alpha_mean,
/// var_direct, var_corrected, var_cl_ideal, var_cl_detected,
/// var_cl_differential, gamma, gamma_err, exposure_ratio. Scientific
/// notation, locale-independent, LF line endings; byte-stable for equal
/// inputs.
std::string report_csv(const std::vector<PerformanceReport>& rows);
std::vector<PerformanceReport> parse_report_csv(const std::string& text);

} // namespace twinbeam
