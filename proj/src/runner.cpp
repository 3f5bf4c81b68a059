#include "twinbeam/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>
#include <vector>

#include "twinbeam/analysis.hpp"
#include "twinbeam/errors.hpp"
#include "twinbeam/estimators.hpp"
#include "twinbeam/frames.hpp"
#include "twinbeam/model.hpp"
#include "twinbeam/rng.hpp"
#include "twinbeam/stats.hpp"
#include "twinbeam/text.hpp"

namespace twinbeam {

namespace {

// Seed lineage of a run: stream 1 feeds the calibration batch, streams
// 1000+i the measurement batch of alpha set point i, streams 2000+i its
// Monte Carlo baseline.
constexpr std::uint64_t kCalibrationStream = 1;
constexpr std::uint64_t kAlphaStreamBase = 1000;
constexpr std::uint64_t kBaselineStreamBase = 2000;

unsigned resolve_threads(int threads) {
  if (threads > 0) return static_cast<unsigned>(threads);
  return std::max(1u, std::thread::hardware_concurrency());
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  os << content;
  if (!os) throw Error("write to '" + path + "' failed");
}

std::string output_path(const RunConfig& config, const std::string& name) {
  std::error_code ec;
  std::filesystem::create_directories(config.output_dir, ec);
  if (ec)
    throw Error("cannot create output directory '" + config.output_dir +
                "': " + ec.message());
  return (std::filesystem::path(config.output_dir) / name).string();
}

// Counts-only view of a simulated batch. Without a camera this is
// generate_batch verbatim. With one, pixel strips are synthesized per frame,
// integrated over ROIs fitted to the mean of the first 10 frames, corrected
// for the ROI capture fraction and then dropped, keeping memory bounded for
// large calibration batches. Frame i always draws from RngStream(seed, i),
// so both paths share the identical underlying photon counts and any thread
// count gives the same batch.
FrameBatch simulate_counts(const SourceParams& source, const SampleParams& sample,
                           const std::optional<CameraParams>& camera,
                           const SpotGeometry& geometry, double roi_sigmas,
                           std::size_t n_frames, std::uint64_t seed, int threads) {
  if (!camera)
    return generate_batch(source, sample, std::nullopt, n_frames, seed, threads);

  validate(*camera);
  validate(geometry);
  if (n_frames < 1) throw DomainError("simulate_counts: n_frames must be >= 1");

  const std::vector<double> w1 =
      spot_unit_weights(geometry.pixels, geometry.center1, geometry.width1);
  const std::vector<double> w2 =
      spot_unit_weights(geometry.pixels, geometry.center2, geometry.width2);

  // Beam windows come from the mean profile of the first frames, exactly as
  // recover_counts does for an in-memory batch.
  const std::size_t n_fit = std::min<std::size_t>(10, n_frames);
  BinnedFrame mean1, mean2;
  mean1.pixels.assign(static_cast<std::size_t>(geometry.pixels), 0.0);
  mean2.pixels.assign(static_cast<std::size_t>(geometry.pixels), 0.0);
  mean1.exposure_s = mean2.exposure_s = geometry.exposure_s;
  for (std::size_t i = 0; i < n_fit; ++i) {
    RngStream rng(seed, static_cast<std::uint64_t>(i));
    FrameRecord fr = generate_frame(source, sample, rng);
    synthesize_raw(fr, w1, w2, *camera, rng);
    for (std::size_t j = 0; j < mean1.pixels.size(); ++j) {
      mean1.pixels[j] += fr.raw1[j];
      mean2.pixels[j] += fr.raw2[j];
    }
  }
  for (double& v : mean1.pixels) v /= static_cast<double>(n_fit);
  for (double& v : mean2.pixels) v /= static_cast<double>(n_fit);

  auto fit_single = [&](const BinnedFrame& f, const char* arm) {
    auto rois = fit_beam_profile(f, roi_sigmas);
    if (rois.size() != 1)
      throw ConfigurationError(std::string("simulate_counts: expected a single beam on the ") +
                               arm + " strip");
    return rois.front();
  };
  const RoiSpec roi1 = fit_single(mean1, "arm-1");
  const RoiSpec roi2 = fit_single(mean2, "arm-2");
  const double cap1 = capture_fraction(roi1);
  const double cap2 = capture_fraction(roi2);

  FrameBatch batch;
  batch.seed = seed;
  batch.params = ParamsSnapshot{source, sample, camera, geometry};
  batch.frames.resize(n_frames);

  auto fill = [&](std::size_t begin, std::size_t end) {
    FrameRecord fr; // buffers reused across frames
    BinnedFrame b1, b2;
    b1.exposure_s = b2.exposure_s = geometry.exposure_s;
    for (std::size_t i = begin; i < end; ++i) {
      RngStream rng(seed, static_cast<std::uint64_t>(i));
      fr = generate_frame(source, sample, rng);
      synthesize_raw(fr, w1, w2, *camera, rng);
      b1.pixels = std::move(fr.raw1);
      b2.pixels = std::move(fr.raw2);
      batch.frames[i].n1 = integrate_roi(b1, roi1, *camera) / cap1;
      batch.frames[i].n2 = integrate_roi(b2, roi2, *camera) / cap2;
      fr.raw1 = std::move(b1.pixels);
      fr.raw2 = std::move(b2.pixels);
    }
  };

  unsigned n_threads = std::min<unsigned>(resolve_threads(threads),
                                          static_cast<unsigned>(n_frames));
  if (n_threads <= 1) {
    fill(0, n_frames);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n_frames + n_threads - 1) / n_threads;
    for (unsigned t = 0; t < n_threads; ++t) {
      const std::size_t b = t * chunk;
      const std::size_t e = std::min(n_frames, b + chunk);
      if (b >= e) break;
      pool.emplace_back(fill, b, e);
    }
    for (auto& th : pool) th.join();
  }
  return batch;
}

Calibration calibrate_from_config(const RunConfig& config, int threads) {
  const FrameBatch batch = simulate_counts(
      config.source, SampleParams{0.0},
      config.camera_enabled ? std::optional<CameraParams>(config.camera)
                            : std::nullopt,
      config.geometry, config.roi_half_width_sigmas, config.calibration_frames,
      derive_seed(config.seed, kCalibrationStream), threads);
  return calibrate(batch);
}

struct AlphaResult {
  PerformanceReport row;
  std::string histogram;
  std::string summary;
};

std::string histogram_file(double alpha, const std::vector<double>& direct,
                           const std::vector<double>& corrected,
                           const GaussianFitSummary& fit_direct,
                           const GaussianFitSummary& fit_corrected, double snl_sd) {
  // Shared bin grid over both estimators so the two columns are directly
  // comparable in a plot.
  double lo = direct.front(), hi = direct.front();
  for (double v : direct) { lo = std::min(lo, v); hi = std::max(hi, v); }
  for (double v : corrected) { lo = std::min(lo, v); hi = std::max(hi, v); }
  std::size_t n_bins = freedman_diaconis_bins(direct);
  if (!(hi > lo)) { hi = lo + 1.0; n_bins = 5; }
  const double width = (hi - lo) / static_cast<double>(n_bins);

  std::vector<std::size_t> cd(n_bins, 0), cc(n_bins, 0);
  auto fill = [&](const std::vector<double>& vals, std::vector<std::size_t>& out) {
    for (double v : vals) {
      std::size_t b = static_cast<std::size_t>((v - lo) / width);
      if (b >= n_bins) b = n_bins - 1;
      ++out[b];
    }
  };
  fill(direct, cd);
  fill(corrected, cc);

  std::ostringstream os;
  os << "# alpha_true=" << format_double_sci(alpha) << "\n";
  os << "# n_estimates=" << direct.size() << "\n";
  os << "# fit_direct mean=" << format_double_sci(fit_direct.mean)
     << " sd=" << format_double_sci(fit_direct.sd)
     << " amplitude=" << format_double_sci(fit_direct.amplitude) << "\n";
  os << "# fit_corrected mean=" << format_double_sci(fit_corrected.mean)
     << " sd=" << format_double_sci(fit_corrected.sd)
     << " amplitude=" << format_double_sci(fit_corrected.amplitude) << "\n";
  os << "# snl_sd=" << format_double_sci(snl_sd) << "\n";
  os << "bin_center,count_direct,count_corrected\n";
  for (std::size_t b = 0; b < n_bins; ++b) {
    const double center = lo + (static_cast<double>(b) + 0.5) * width;
    os << format_double_sci(center) << "," << cd[b] << "," << cc[b] << "\n";
  }
  return os.str();
}

AlphaResult sweep_alpha(const RunConfig& config, const Calibration& cal,
                        std::size_t index, double alpha) {
  try {
    const std::size_t n_frames =
        config.protocol.n_series * config.protocol.frames_per_series;
    const FrameBatch batch = simulate_counts(
        config.source, SampleParams{alpha},
        config.camera_enabled ? std::optional<CameraParams>(config.camera)
                              : std::nullopt,
        config.geometry, config.roi_half_width_sigmas, n_frames,
        derive_seed(config.seed, kAlphaStreamBase + index), 1);

    std::vector<AbsorptionEstimate> direct, corrected;
    direct.reserve(n_frames);
    corrected.reserve(n_frames);
    for (std::size_t s = 0; s < config.protocol.n_series; ++s) {
      try {
        const std::size_t b = s * config.protocol.frames_per_series;
        const std::size_t e = b + config.protocol.frames_per_series;
        double n2_sum = 0.0;
        for (std::size_t i = b; i < e; ++i) n2_sum += batch.frames[i].n2;
        const Calibration cal_s = drift_correct(
            cal, n2_sum / static_cast<double>(config.protocol.frames_per_series));
        for (std::size_t i = b; i < e; ++i) {
          direct.push_back(estimate_direct(batch.frames[i], cal_s));
          corrected.push_back(estimate_corrected(batch.frames[i], cal_s));
        }
      } catch (const Error& e) {
        std::ostringstream os;
        os << "series " << s << ": " << e.what();
        throw Error(os.str());
      }
    }

    const SeriesStats cs = series_statistics(corrected, config.protocol);
    const SeriesStats ds = series_statistics(direct, config.protocol);

    PerformanceReport row;
    row.alpha_true = alpha;
    row.alpha_mean = cs.alpha_mean;
    row.var_direct = ds.var_mean;
    row.var_exp = cs.var_mean;
    row.var_exp_err = cs.var_err;
    row.var_cl = snl_variance(alpha, config.eta_d, cal.n1p_mean);

    const BaselineCurves bl = baseline_curves(
        {alpha}, config.eta_d, cal.n1p_mean,
        derive_seed(config.seed, kBaselineStreamBase + index),
        config.baseline_mc_frames);
    row.var_cl_detected = bl.detected.front();
    row.var_cl_differential = bl.differential.front();

    row.gamma = gamma_ratio(row.var_cl, row.var_exp);
    const double rel_stat = cs.var_err / cs.var_mean;
    const double rel_eta = config.eta_d_err / config.eta_d;
    row.gamma_err = row.gamma * std::sqrt(rel_stat * rel_stat + rel_eta * rel_eta);
    row.exposure_ratio = exposure_ratio(row.gamma);

    std::vector<double> dv, cv;
    dv.reserve(n_frames);
    cv.reserve(n_frames);
    for (const auto& e : direct) dv.push_back(e.alpha_hat);
    for (const auto& e : corrected) cv.push_back(e.alpha_hat);
    const GaussianFitSummary fd = fit_gaussian(direct);
    const GaussianFitSummary fc = fit_gaussian(corrected);
    const double snl_sd = std::sqrt(row.var_cl);

    AlphaResult out;
    out.row = row;
    out.histogram = histogram_file(alpha, dv, cv, fd, fc, snl_sd);
    std::ostringstream sm;
    sm << "alpha=" << format_fixed(alpha, 6) << "  gamma=" << format_fixed(row.gamma, 4)
       << " +/- " << format_fixed(row.gamma_err, 4)
       << "  exposure_ratio=" << format_fixed(row.exposure_ratio, 4);
    out.summary = sm.str();
    return out;
  } catch (const Error& e) {
    std::ostringstream os;
    os << "alpha set point " << format_double(alpha) << " (index " << index
       << "): " << e.what();
    throw Error(os.str());
  }
}

} // namespace

int run_calibrate(const RunConfig& config, std::ostream& out, int threads) {
  validate(config);
  const Calibration cal = calibrate_from_config(config, threads);
  const std::string path = output_path(config, "calibration.txt");
  write_file(path, calibration_to_text(cal));
  out << "calibration written to " << path << "\n";
  out << "frames_used=" << cal.n_frames_used
      << " n1p_mean=" << format_fixed(cal.n1p_mean, 3)
      << " n2_mean=" << format_fixed(cal.n2_mean, 3) << "\n";
  out << "sigma=" << format_fixed(cal.sigma, 4) << "\n";
  out << "heralding_equivalent_efficiency=" << format_fixed(1.0 - cal.sigma, 4)
      << "\n";
  return kExitOk;
}

int run_sweep(const RunConfig& config, std::ostream& out, int threads) {
  validate(config);
  const unsigned n_workers = resolve_threads(threads);

  const Calibration cal = calibrate_from_config(config, threads);
  write_file(output_path(config, "calibration.txt"), calibration_to_text(cal));

  const std::size_t n_alpha = config.alpha_list.size();
  std::vector<std::optional<AlphaResult>> results(n_alpha);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mx;

  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n_alpha) return;
      try {
        results[i] = sweep_alpha(config, cal, i, config.alpha_list[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mx);
        if (!failure) failure = std::current_exception();
        next.store(n_alpha); // stop handing out work after a failure
        return;
      }
    }
  };

  const unsigned pool_size =
      std::min<unsigned>(n_workers, static_cast<unsigned>(n_alpha));
  if (pool_size <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(pool_size);
    for (unsigned t = 0; t < pool_size; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<PerformanceReport> rows;
  rows.reserve(n_alpha);
  for (std::size_t i = 0; i < n_alpha; ++i) {
    // A worker can only have skipped an index by failing, which rethrew above.
    rows.push_back(results[i]->row);
    std::ostringstream name;
    name << "hist_";
    if (i < 10) name << "0";
    name << i << ".csv";
    write_file(output_path(config, name.str()), results[i]->histogram);
    out << results[i]->summary << "\n";
  }
  const std::string csv_path = output_path(config, "report.csv");
  write_file(csv_path, report_csv(rows));
  out << "report written to " << csv_path << "\n";
  return kExitOk;
}

int run_report(const std::string& csv_path, double flag_threshold,
               std::ostream& out) {
  if (!(flag_threshold >= 0.0))
    throw DomainError("run_report: flag threshold must be >= 0");
  std::ifstream is(csv_path, std::ios::binary);
  if (!is) throw ParseError("cannot open report CSV '" + csv_path + "'");
  std::ostringstream buf;
  buf << is.rdbuf();
  const std::vector<PerformanceReport> rows = parse_report_csv(buf.str());

  if (rows.empty()) {
    out << "no data: " << csv_path << " has a valid header but no rows\n";
    return kExitEmpty;
  }

  out << "alpha_true   gamma     gamma_err  exposure   verdict\n";
  std::size_t flagged = 0;
  for (const auto& r : rows) {
    const bool advantage = r.gamma - 1.0 > flag_threshold * r.gamma_err;
    out << format_fixed(r.alpha_true, 6) << "   " << format_fixed(r.gamma, 4)
        << "    " << format_fixed(r.gamma_err, 4) << "     "
        << format_fixed(r.exposure_ratio, 4) << "     ";
    if (advantage) {
      ++flagged;
      out << "quantum advantage detected";
      if (r.gamma_err > 0.0)
        out << " (" << format_fixed((r.gamma - 1.0) / r.gamma_err, 1) << " sd)";
    } else {
      out << "-";
    }
    out << "\n";
  }
  out << flagged << " of " << rows.size()
      << " set points show an advantage beyond " << format_fixed(flag_threshold, 1)
      << " standard errors\n";
  return kExitOk;
}

} // namespace twinbeam
