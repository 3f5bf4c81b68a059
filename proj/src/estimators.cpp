#include "twinbeam/estimators.hpp"

#include <sstream>
#include <vector>

#include "twinbeam/errors.hpp"
#include "twinbeam/stats.hpp"
#include "twinbeam/text.hpp"

namespace twinbeam {

namespace {

// FNV-1a over the canonical text form; gives estimates a stable reference
// to the exact calibration values they were computed with.
std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

} // namespace

const char* to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::direct: return "direct";
    case EstimatorKind::corrected: return "corrected";
    case EstimatorKind::differential: return "differential";
  }
  return "unknown";
}

void validate(const Calibration& c) {
  if (!(c.n1p_mean > 0.0))
    throw DomainError("Calibration.n1p_mean must be > 0");
  if (!(c.n2_mean > 0.0)) throw DomainError("Calibration.n2_mean must be > 0");
  if (!(c.sigma >= 0.0)) throw DomainError("Calibration.sigma must be >= 0");
  if (c.n_frames_used < 2)
    throw DomainError("Calibration.n_frames_used must be >= 2");
}

Calibration calibrate(const FrameBatch& batch) {
  if (batch.frames.size() < 2)
    throw InsufficientDataError("calibrate: need at least 2 frames");

  std::vector<double> n1, n2, diff;
  n1.reserve(batch.frames.size());
  n2.reserve(batch.frames.size());
  diff.reserve(batch.frames.size());
  for (const auto& fr : batch.frames) {
    n1.push_back(fr.n1);
    n2.push_back(fr.n2);
    diff.push_back(fr.n1 - fr.n2);
  }

  Calibration c;
  c.n1p_mean = mean(n1);
  c.n2_mean = mean(n2);
  c.n_frames_used = batch.frames.size();
  c.seed = batch.seed;

  const double var2 = variance(n2);
  if (var2 <= 0.0)
    throw DegenerateCalibrationError(
        "calibrate: reference arm shows zero variance; cannot form a gain");
  if (!(c.n1p_mean > 0.0) || !(c.n2_mean > 0.0))
    throw DegenerateCalibrationError("calibrate: non-positive mean count");

  const double cov = covariance(n1, n2);
  c.C = cov / (c.n1p_mean * var2);
  c.deltaE = c.C * cov;
  c.sigma = variance(diff) / (c.n1p_mean + c.n2_mean);
  c.id = fnv1a(calibration_to_text(c));
  return c;
}

AbsorptionEstimate estimate_direct(const FrameRecord& frame, const Calibration& calib) {
  validate(calib);
  AbsorptionEstimate est;
  est.alpha_hat = 1.0 - frame.n1 / calib.n1p_mean;
  est.kind = EstimatorKind::direct;
  est.calibration_id = calib.id;
  return est;
}

AbsorptionEstimate estimate_corrected(const FrameRecord& frame, const Calibration& calib) {
  validate(calib);
  const double k = calib.C * frame.n1;
  const double dE = calib.deltaE * frame.n1 / calib.n1p_mean;
  AbsorptionEstimate est;
  est.alpha_hat =
      1.0 - (frame.n1 - k * (frame.n2 - calib.n2_mean) + dE) / calib.n1p_mean;
  est.kind = EstimatorKind::corrected;
  est.calibration_id = calib.id;
  return est;
}

AbsorptionEstimate estimate_differential(const FrameRecord& frame,
                                         const Calibration& calib) {
  validate(calib);
  AbsorptionEstimate est;
  est.alpha_hat = 1.0 - (frame.n1 - (frame.n2 - calib.n2_mean)) / calib.n1p_mean;
  est.kind = EstimatorKind::differential;
  est.calibration_id = calib.id;
  return est;
}

Calibration drift_correct(const Calibration& calib, double n2_series_mean) {
  validate(calib);
  if (!(n2_series_mean > 0.0))
    throw DomainError("drift_correct: n2_series_mean must be > 0");
  Calibration out = calib;
  out.n1p_mean = calib.n1p_mean * (n2_series_mean / calib.n2_mean);
  out.n2_mean = n2_series_mean;
  out.id = fnv1a(calibration_to_text(out));
  return out;
}

std::string calibration_to_text(const Calibration& calib) {
  std::ostringstream os;
  os << "n1p_mean=" << format_double(calib.n1p_mean) << "\n";
  os << "n2_mean=" << format_double(calib.n2_mean) << "\n";
  os << "C=" << format_double(calib.C) << "\n";
  os << "deltaE=" << format_double(calib.deltaE) << "\n";
  os << "sigma=" << format_double(calib.sigma) << "\n";
  os << "n_frames_used=" << calib.n_frames_used << "\n";
  os << "seed=" << format_u64(calib.seed) << "\n";
  return os.str();
}

Calibration calibration_from_text(const std::string& text) {
  Calibration c;
  bool seen[7] = {};
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string_view sv = trim(line);
    if (sv.empty() || sv.front() == '#') continue;
    const std::size_t eq = sv.find('=');
    if (eq == std::string_view::npos) {
      std::ostringstream os;
      os << "calibration text line " << line_no << ": expected key=value, got '"
         << sv << "'";
      throw ParseError(os.str());
    }
    const std::string_view key = trim(sv.substr(0, eq));
    const std::string_view val = trim(sv.substr(eq + 1));
    if (key == "n1p_mean") { c.n1p_mean = parse_double(val, key); seen[0] = true; }
    else if (key == "n2_mean") { c.n2_mean = parse_double(val, key); seen[1] = true; }
    else if (key == "C") { c.C = parse_double(val, key); seen[2] = true; }
    else if (key == "deltaE") { c.deltaE = parse_double(val, key); seen[3] = true; }
    else if (key == "sigma") { c.sigma = parse_double(val, key); seen[4] = true; }
    else if (key == "n_frames_used") {
      c.n_frames_used = static_cast<std::size_t>(parse_u64(val, key));
      seen[5] = true;
    } else if (key == "seed") { c.seed = parse_u64(val, key); seen[6] = true; }
    else {
      std::ostringstream os;
      os << "calibration text line " << line_no << ": unknown key '" << key << "'";
      throw ParseError(os.str());
    }
  }
  static const char* kKeys[7] = {"n1p_mean", "n2_mean", "C", "deltaE",
                                 "sigma", "n_frames_used", "seed"};
  for (int i = 0; i < 7; ++i) {
    if (!seen[i]) {
      std::ostringstream os;
      os << "calibration text is missing key '" << kKeys[i] << "'";
      throw ParseError(os.str());
    }
  }
  validate(c);
  c.id = fnv1a(calibration_to_text(c));
  return c;
}

} // namespace twinbeam
