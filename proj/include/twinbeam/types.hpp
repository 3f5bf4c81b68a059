#pragma once
#include <cstdint>
#include <optional>
#include <vector>

namespace twinbeam {

/// Twin-beam source parameters. Efficiencies are end-to-end per arm
/// (collection path and detector folded together, sample excluded).
struct SourceParams {
  double mu = 1e6;          ///< mean photon pairs generated per acquisition
  double eta1 = 0.62;       ///< total arm-1 efficiency excluding the sample
  double eta2 = 0.62;       ///< total arm-2 efficiency
  double excess_noise = 0.0; ///< fractional variance of a common multiplicative gain; 0 = pure Poisson pump
  double bg1 = 0.0;         ///< mean uncorrelated background counts per acquisition, arm 1
  double bg2 = 0.0;         ///< mean uncorrelated background counts per acquisition, arm 2
};

/// Absorbing sample in arm 1; transmission is 1 - alpha.
struct SampleParams {
  double alpha = 0.0;
};

/// CCD conversion model: photon number N relates to grey level E through
/// N = S * (E - offset).
struct CameraParams {
  double sensitivity = 0.71; ///< photoelectrons per grey level
  double offset = 300.0;     ///< electronic offset in grey levels
  double read_noise = 0.0;   ///< additive readout noise per pixel, grey levels
  bool quantize = false;     ///< round grey levels to integers (half to even)
};

/// Layout of the two synthesized beam spots on the vertically binned sensor.
struct SpotGeometry {
  int pixels = 1024;      ///< strip length per arm
  double center1 = 320.0; ///< arm-1 spot center, pixels
  double width1 = 8.0;    ///< arm-1 Gaussian standard deviation, pixels
  double center2 = 704.0; ///< arm-2 spot center, pixels
  double width2 = 8.0;    ///< arm-2 Gaussian standard deviation, pixels
  double exposure_s = 0.5;
};

/// One acquisition. In counts mode n1/n2 hold the detected photon numbers.
/// In camera mode raw1/raw2 hold per-arm binned pixel strips in grey levels
/// and n1/n2 stay zero until recovered through ROI integration.
struct FrameRecord {
  double n1 = 0.0;
  double n2 = 0.0;
  std::vector<double> raw1;
  std::vector<double> raw2;

  bool has_raw() const { return !raw1.empty() || !raw2.empty(); }
};

/// Everything that went into generating a batch, kept for audit.
struct ParamsSnapshot {
  SourceParams source;
  SampleParams sample;
  std::optional<CameraParams> camera;
  std::optional<SpotGeometry> geometry;
};

/// Ordered sequence of acquisitions sharing one parameter snapshot.
/// params is absent for ingested (externally recorded) data.
struct FrameBatch {
  std::vector<FrameRecord> frames;
  std::uint64_t seed = 0;
  std::optional<ParamsSnapshot> params;

  std::size_t size() const { return frames.size(); }
};

} // namespace twinbeam
