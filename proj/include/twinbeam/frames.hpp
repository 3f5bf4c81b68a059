#pragma once
#include <string>
#include <vector>

#include "twinbeam/rng.hpp"
#include "twinbeam/types.hpp"

namespace twinbeam {

/// One fully vertically binned sensor row (grey levels per pixel).
struct BinnedFrame {
  std::vector<double> pixels;
  double exposure_s = 0.5;
};

/// Pixel window holding one beam. Bounds are inclusive pixel indices; the
/// window spans roughly +/- half_width_sigmas fitted standard deviations
/// around the fitted center, rounded outward.
struct RoiSpec {
  double center_px = 0.0;
  double width_px = 0.0;
  int lo_px = 0;
  int hi_px = 0;
};

/// Photon number carried by a grey level above the electronic offset:
/// N = S * (E - offset). Not clamped; noise-dominated pixels may come out
/// slightly negative and clamping them would bias ROI sums.
double grey_to_photons(double grey, double offset, double sensitivity);

/// Fraction of a pixel's extent [j, j+1) covered by a unit Gaussian centered
/// at `center` with standard deviation `width`, for every pixel of the strip.
/// The weights sum to the fraction of the Gaussian falling on the strip
/// (1 up to far-tail underflow for a spot well inside it).
std::vector<double> spot_unit_weights(int pixels, double center, double width);

/// Render the frame's photon counts as two grey-level strips: pixel value
/// n * w[j] / S + offset, then per-pixel Gaussian read noise (grey levels)
/// and optional round-half-to-even quantization. Clears n1/n2 afterwards;
/// counts are meant to be recovered by ROI integration downstream.
void synthesize_raw(FrameRecord& frame, const std::vector<double>& weights1,
                    const std::vector<double>& weights2, const CameraParams& camera,
                    RngStream& rng);

/// Locate one or two Gaussian-like peaks rising at least 5x above the
/// background noise floor (a second peak must also reach 1% of the first's
/// amplitude), fit each, and return their windows sorted by center. Throws
/// DetectionError when no peak qualifies and ConfigurationError when two
/// fitted windows overlap.
std::vector<RoiSpec> fit_beam_profile(const BinnedFrame& frame,
                                      double half_width_sigmas = 2.5);

/// Fraction of a Gaussian spot with the ROI's fitted center and width that
/// falls inside [lo_px, hi_px] (pixel-edge convention).
double capture_fraction(const RoiSpec& roi);

/// Window spanning +/- half_width_sigmas around center, rounded outward and
/// clipped to the strip.
RoiSpec make_roi(double center, double width, int pixels, double half_width_sigmas);

/// Sum of grey_to_photons over the ROI pixels.
double integrate_roi(const BinnedFrame& frame, const RoiSpec& roi,
                     const CameraParams& camera);

/// Fill n1/n2 for every frame of a camera-mode batch: average the first
/// fit_frames frames per arm, fit that mean profile once, then integrate the
/// fitted ROI in every frame and divide by its capture fraction.
/// Returns the two ROIs used (arm 1, arm 2).
std::vector<RoiSpec> recover_counts(FrameBatch& batch, const CameraParams& camera,
                                    double half_width_sigmas = 2.5,
                                    std::size_t fit_frames = 10);

/// Persist/load a batch as line-oriented UTF-8 text (LF endings, '.' decimal
/// separator): a key=value header carrying format version, kind
/// (counts or pixels), seed and the parameter snapshot, then one row per
/// frame between begin_frames/end_frames. Round-trips all values exactly.
/// Malformed input raises ParseError with a line diagnostic; an unknown
/// format version raises VersionError before any frame is read.
void save_batch(const FrameBatch& batch, const std::string& path);
FrameBatch load_batch(const std::string& path);

} // namespace twinbeam
