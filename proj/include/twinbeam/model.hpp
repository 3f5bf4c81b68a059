#pragma once
#include <cstdint>
#include <optional>
#include <vector>

#include "twinbeam/rng.hpp"
#include "twinbeam/types.hpp"

namespace twinbeam {

/// Throw DomainError naming the offending field if any parameter is out of range.
void validate(const SourceParams& p);
void validate(const SampleParams& p);
void validate(const CameraParams& p);
void validate(const SpotGeometry& g);

/// Draw one acquisition. Sampling pipeline, in draw order:
///   1. gain g = 1 if excess_noise == 0, else Gamma(shape 1/eps2, scale eps2),
///      a positive common multiplicative gain with mean 1 and variance eps2.
///   2. M ~ Poisson(mu * g), the number of photon pairs generated.
///   3. With p1 = eta1 * (1 - alpha) and p2 = eta2, split the M pairs
///      multinomially over (both detected, only arm 1, only arm 2, neither)
///      with probabilities (p1*p2, p1*(1-p2), (1-p1)*p2, remainder).
///   4. n1 = n11 + n10 + Poisson(bg1), n2 = n11 + n01 + Poisson(bg2);
///      background draws are skipped when the respective rate is 0.
/// Each detected photon is an independent thinning of the same pair, which
/// is what produces Cov(n1, n2) = mu * p1 * p2.
FrameRecord generate_frame(const SourceParams& source, const SampleParams& sample,
                           RngStream& rng);

/// Generate n_frames independent acquisitions. Frame i draws from
/// RngStream(seed, i), so output is identical for any thread count.
/// When camera is present, per-arm pixel strips are synthesized from the
/// drawn counts (two Gaussian spots, see frames module) and n1/n2 are reset
/// to 0, to be recovered downstream via ROI integration.
/// threads <= 0 selects the hardware concurrency.
FrameBatch generate_batch(const SourceParams& source, const SampleParams& sample,
                          const std::optional<CameraParams>& camera,
                          std::size_t n_frames, std::uint64_t seed, int threads = 1,
                          const SpotGeometry& geometry = SpotGeometry{});

/// Two independent Poisson arms with the given means; no pair correlation.
/// Serves as the shot-noise-limited reference (sigma -> 1) and as the
/// classical differential-measurement arm model.
FrameBatch generate_independent_batch(double mean1, double mean2,
                                      std::size_t n_frames, std::uint64_t seed);

/// Product of a chain of transmission/detection efficiencies.
/// Empty chain gives 1. Any factor outside [0,1] is a DomainError.
double loss_budget(const std::vector<double>& factors);

/// Efficiency of a device under test deduced by comparing heralding ratios
/// measured through the same optical path with a reference detector:
/// eta_dut = eta_ref * heralding_dut / heralding_ref.
/// All inputs must lie in (0,1]; a result above 1 means the two measurements
/// are incompatible with a physical efficiency and raises InconsistencyError.
double infer_detector_efficiency(double heralding_dut, double heralding_ref,
                                 double eta_ref);

} // namespace twinbeam
