#pragma once
#include <cstdint>
#include <string>

#include "twinbeam/types.hpp"

namespace twinbeam {

/// Sample-free reference statistics for the estimators. Immutable once
/// built; safe to share across threads.
struct Calibration {
  double n1p_mean = 0.0; ///< mean probe-arm count with no sample in place
  double n2_mean = 0.0;  ///< mean reference-arm count
  double C = 0.0;        ///< gain constant, 1/count; per-frame gain k = C * n1
  double deltaE = 0.0;   ///< bias correction, counts, scaled by n1/n1p_mean at use
  double sigma = 0.0;    ///< measured noise reduction factor of the batch
  std::size_t n_frames_used = 0;
  std::uint64_t seed = 0; ///< seed of the calibration batch, for audit
  std::uint64_t id = 0;   ///< content hash stamped onto estimates
};

enum class EstimatorKind { direct, corrected, differential };

const char* to_string(EstimatorKind kind);

struct AbsorptionEstimate {
  double alpha_hat = 0.0; ///< not clamped; may stochastically leave [0,1]
  EstimatorKind kind = EstimatorKind::direct;
  std::uint64_t calibration_id = 0;
};

/// Throws DomainError naming the offending field.
void validate(const Calibration& c);

/// Build reference statistics from a batch recorded with no sample:
/// means of both arms, sigma = Var(n1-n2)/(mean1+mean2),
/// C = Cov(n1,n2)/(mean1*Var(n2)) (the variance-minimizing linear gain,
/// normalized so k = C*n1 has the right scale), and deltaE = C*Cov(n1,n2).
/// Fewer than 2 frames is an InsufficientDataError; for statistically
/// meaningful constants use at least a few hundred.
/// Var(n2) = 0 is a DegenerateCalibrationError.
Calibration calibrate(const FrameBatch& batch_no_sample);

/// alpha_hat = 1 - n1 / n1p_mean.
AbsorptionEstimate estimate_direct(const FrameRecord& frame, const Calibration& calib);

/// alpha_hat = 1 - (n1 - k*(n2 - n2_mean) + dE) / n1p_mean with k = C*n1 and
/// dE = deltaE * n1/n1p_mean. Scaling the bias term with the transmitted
/// intensity keeps the mean equal to alpha at every absorption level, not
/// just at the calibration point.
AbsorptionEstimate estimate_corrected(const FrameRecord& frame, const Calibration& calib);

/// Classical two-detector reference: alpha_hat = 1 - (n1 - (n2 - n2_mean)) / n1p_mean,
/// i.e. the corrected form with the gain pinned to the balanced value 1.
AbsorptionEstimate estimate_differential(const FrameRecord& frame,
                                         const Calibration& calib);

/// Rescale the calibration to the source power seen during a measurement
/// series: n1p_mean is multiplied by n2_series_mean / n2_mean and n2_mean is
/// replaced, on the grounds that a common pump drift moves both arms
/// proportionally. C, deltaE and sigma are kept.
Calibration drift_correct(const Calibration& calib, double n2_series_mean);

/// Flat key=value text block (keys: n1p_mean, n2_mean, C, deltaE, sigma,
/// n_frames_used, seed), one per line, exact round-trip.
std::string calibration_to_text(const Calibration& calib);
Calibration calibration_from_text(const std::string& text);

} // namespace twinbeam
