#include "twinbeam/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "twinbeam/errors.hpp"
#include "twinbeam/gaussian_fit.hpp"
#include "twinbeam/model.hpp"
#include "twinbeam/rng.hpp"
#include "twinbeam/stats.hpp"
#include "twinbeam/text.hpp"

namespace twinbeam {

namespace {

std::vector<double> values_of(const std::vector<AbsorptionEstimate>& estimates) {
  std::vector<double> v;
  v.reserve(estimates.size());
  for (const auto& e : estimates) v.push_back(e.alpha_hat);
  return v;
}

// Quartile by linear interpolation on the sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

GaussianFitSummary fit_histogram(const std::vector<double>& values,
                                 std::size_t n_bins) {
  const auto [min_it, max_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *min_it;
  const double hi = *max_it;
  if (!(hi > lo))
    throw FitError("fit_gaussian: all estimates identical; histogram has no width",
                   0.0);

  const double bin_w = (hi - lo) / static_cast<double>(n_bins);
  std::vector<double> centers(n_bins), counts(n_bins, 0.0);
  for (std::size_t b = 0; b < n_bins; ++b)
    centers[b] = lo + (static_cast<double>(b) + 0.5) * bin_w;
  for (double v : values) {
    std::size_t b = static_cast<std::size_t>((v - lo) / bin_w);
    if (b >= n_bins) b = n_bins - 1;
    counts[b] += 1.0;
  }

  const double m0 = mean(values);
  const double s0 = standard_deviation(values);
  if (!(s0 > 0.0))
    throw FitError("fit_gaussian: zero spread in estimates", 0.0);
  const double a0 = *std::max_element(counts.begin(), counts.end());

  const GaussianCurve fit = fit_gaussian_curve(centers, counts, a0, m0, s0);
  return {fit.mean, fit.sigma, fit.amplitude};
}

} // namespace

double noise_reduction_factor(const FrameBatch& batch) {
  if (batch.frames.size() < 2)
    throw InsufficientDataError("noise_reduction_factor: need at least 2 frames");
  std::vector<double> diff;
  diff.reserve(batch.frames.size());
  double sum1 = 0.0, sum2 = 0.0;
  for (const auto& fr : batch.frames) {
    diff.push_back(fr.n1 - fr.n2);
    sum1 += fr.n1;
    sum2 += fr.n2;
  }
  const double total_mean =
      (sum1 + sum2) / static_cast<double>(batch.frames.size());
  if (!(total_mean > 0.0))
    throw InsufficientDataError(
        "noise_reduction_factor: zero total intensity in batch");
  return variance(diff) / total_mean;
}

double snl_variance(double alpha, double eta_d, double n1p_mean) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw DomainError("snl_variance: alpha must be in [0, 1]");
  if (!(eta_d > 0.0 && eta_d <= 1.0))
    throw DomainError("snl_variance: eta_d must be in (0, 1]");
  if (!(n1p_mean > 0.0)) throw DomainError("snl_variance: n1p_mean must be > 0");
  return (1.0 - alpha) * eta_d / n1p_mean;
}

double gamma_ratio(double var_cl, double var_exp) {
  if (!(var_exp > 0.0)) throw DomainError("gamma_ratio: var_exp must be > 0");
  return var_cl / var_exp;
}

double exposure_ratio(double gamma) {
  if (!(gamma > 0.0)) throw DomainError("exposure_ratio: gamma must be > 0");
  return 1.0 / gamma;
}

SeriesStats series_statistics(const std::vector<AbsorptionEstimate>& estimates,
                              const SeriesProtocol& protocol) {
  if (protocol.n_series < 2 || protocol.frames_per_series < 2)
    throw ProtocolError(
        "series_statistics: protocol needs n_series >= 2 and frames_per_series >= 2");
  const std::size_t expect = protocol.n_series * protocol.frames_per_series;
  if (estimates.size() != expect) {
    std::ostringstream os;
    os << "series_statistics: got " << estimates.size() << " estimates, protocol "
       << protocol.n_series << " x " << protocol.frames_per_series << " needs "
       << expect;
    throw ProtocolError(os.str());
  }

  std::vector<double> series_var(protocol.n_series);
  std::vector<double> chunk(protocol.frames_per_series);
  double grand = 0.0;
  for (std::size_t s = 0; s < protocol.n_series; ++s) {
    for (std::size_t i = 0; i < protocol.frames_per_series; ++i) {
      chunk[i] = estimates[s * protocol.frames_per_series + i].alpha_hat;
      grand += chunk[i];
    }
    series_var[s] = variance(chunk);
  }

  SeriesStats out;
  out.var_mean = mean(series_var);
  out.var_err = standard_deviation(series_var) /
                std::sqrt(static_cast<double>(protocol.n_series));
  out.alpha_mean = grand / static_cast<double>(expect);
  return out;
}

GaussianFitSummary fit_gaussian(const std::vector<AbsorptionEstimate>& estimates,
                                std::size_t n_bins) {
  if (estimates.size() < 100)
    throw InsufficientDataError("fit_gaussian: need at least 100 estimates");
  if (n_bins < 5) throw DomainError("fit_gaussian: need at least 5 bins");
  return fit_histogram(values_of(estimates), n_bins);
}

std::size_t freedman_diaconis_bins(const std::vector<double>& values) {
  if (values.size() < 2)
    throw InsufficientDataError("freedman_diaconis_bins: need at least 2 values");
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  const double range = sorted.back() - sorted.front();
  const double width = 2.0 * iqr / std::cbrt(static_cast<double>(values.size()));
  std::size_t n_bins = (width > 0.0 && range > 0.0)
                           ? static_cast<std::size_t>(std::ceil(range / width))
                           : std::size_t{5};
  return std::clamp<std::size_t>(n_bins, 5, 400);
}

GaussianFitSummary fit_gaussian(const std::vector<AbsorptionEstimate>& estimates) {
  if (estimates.size() < 100)
    throw InsufficientDataError("fit_gaussian: need at least 100 estimates");
  const std::vector<double> values = values_of(estimates);
  return fit_histogram(values, freedman_diaconis_bins(values));
}

BaselineCurves baseline_curves(const std::vector<double>& alpha_grid,
                               double eta_d, double n1p_mean, std::uint64_t seed,
                               std::size_t mc_frames) {
  if (mc_frames < 2)
    throw DomainError("baseline_curves: mc_frames must be >= 2");
  BaselineCurves out;
  out.ideal.reserve(alpha_grid.size());
  out.detected.reserve(alpha_grid.size());
  out.differential.reserve(alpha_grid.size());

  Calibration ref;
  ref.n1p_mean = n1p_mean;
  ref.n2_mean = n1p_mean; // balanced 50:50 reference arm
  ref.sigma = 1.0;
  ref.n_frames_used = mc_frames;

  for (std::size_t i = 0; i < alpha_grid.size(); ++i) {
    const double alpha = alpha_grid[i];
    const double ideal = snl_variance(alpha, eta_d, n1p_mean);
    out.ideal.push_back(ideal);
    out.detected.push_back(ideal / eta_d);

    const FrameBatch batch = generate_independent_batch(
        (1.0 - alpha) * n1p_mean, ref.n2_mean, mc_frames,
        derive_seed(seed, static_cast<std::uint64_t>(i)));
    std::vector<double> est;
    est.reserve(mc_frames);
    for (const auto& fr : batch.frames)
      est.push_back(estimate_differential(fr, ref).alpha_hat);
    out.differential.push_back(variance(est));
  }
  return out;
}

namespace {

constexpr const char* kCsvHeader =
    "alpha_true,alpha_mean,var_direct,var_corrected,var_cl_ideal,"
    "var_cl_detected,var_cl_differential,gamma,gamma_err,exposure_ratio";

} // namespace

std::string report_csv(const std::vector<PerformanceReport>& rows) {
  std::ostringstream os;
  os << kCsvHeader << "\n";
  for (const auto& r : rows) {
    os << format_double_sci(r.alpha_true) << "," << format_double_sci(r.alpha_mean)
       << "," << format_double_sci(r.var_direct) << ","
       << format_double_sci(r.var_exp) << "," << format_double_sci(r.var_cl) << ","
       << format_double_sci(r.var_cl_detected) << ","
       << format_double_sci(r.var_cl_differential) << ","
       << format_double_sci(r.gamma) << "," << format_double_sci(r.gamma_err)
       << "," << format_double_sci(r.exposure_ratio) << "\n";
  }
  return os.str();
}

std::vector<PerformanceReport> parse_report_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || trim(line) != kCsvHeader)
    throw ParseError("report CSV line 1: header does not match the column contract");

  std::vector<PerformanceReport> rows;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string_view sv = trim(line);
    if (sv.empty()) continue;
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
      const std::size_t comma = sv.find(',', pos);
      fields.push_back(sv.substr(pos, comma - pos));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (fields.size() != 10) {
      std::ostringstream os;
      os << "report CSV line " << line_no << ": expected 10 fields, got "
         << fields.size();
      throw ParseError(os.str());
    }
    auto field = [&](std::size_t idx, const char* name) {
      std::ostringstream what;
      what << "line " << line_no << " " << name;
      return parse_double(fields[idx], what.str());
    };
    PerformanceReport r;
    r.alpha_true = field(0, "alpha_true");
    r.alpha_mean = field(1, "alpha_mean");
    r.var_direct = field(2, "var_direct");
    r.var_exp = field(3, "var_corrected");
    r.var_cl = field(4, "var_cl_ideal");
    r.var_cl_detected = field(5, "var_cl_detected");
    r.var_cl_differential = field(6, "var_cl_differential");
    r.gamma = field(7, "gamma");
    r.gamma_err = field(8, "gamma_err");
    r.exposure_ratio = field(9, "exposure_ratio");
    rows.push_back(r);
  }
  return rows;
}

} // namespace twinbeam
