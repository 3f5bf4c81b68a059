#include "twinbeam/frames.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "twinbeam/errors.hpp"
#include "twinbeam/gaussian_fit.hpp"
#include "twinbeam/text.hpp"

namespace twinbeam {

namespace {

constexpr const char* kFormatTag = "twinbeam-batch/1";

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double sum_window(const std::vector<double>& pixels, int lo, int hi,
                  double offset, double sensitivity) {
  double grey = 0.0;
  for (int j = lo; j <= hi; ++j) grey += pixels[static_cast<std::size_t>(j)];
  // One conversion of the summed grey keeps the offset subtraction exact:
  // sum of S*(E_j - off) over the window equals S*(sum E_j - n*off).
  const double n = static_cast<double>(hi - lo + 1);
  return sensitivity * (grey - n * offset);
}

double median_of(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double hi = v[mid];
  if (v.size() % 2 == 0) {
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid) - 1,
                     v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (v[mid - 1] + hi);
  }
  return hi;
}

} // namespace

double grey_to_photons(double grey, double offset, double sensitivity) {
  if (!(sensitivity > 0.0))
    throw DomainError("grey_to_photons: sensitivity must be > 0");
  return sensitivity * (grey - offset);
}

std::vector<double> spot_unit_weights(int pixels, double center, double width) {
  if (pixels < 1) throw DomainError("spot_unit_weights: pixels must be >= 1");
  if (!(width > 0.0)) throw DomainError("spot_unit_weights: width must be > 0");
  std::vector<double> w(static_cast<std::size_t>(pixels));
  double cdf_lo = normal_cdf((0.0 - center) / width);
  for (int j = 0; j < pixels; ++j) {
    const double cdf_hi = normal_cdf((static_cast<double>(j + 1) - center) / width);
    w[static_cast<std::size_t>(j)] = cdf_hi - cdf_lo;
    cdf_lo = cdf_hi;
  }
  return w;
}

void synthesize_raw(FrameRecord& frame, const std::vector<double>& weights1,
                    const std::vector<double>& weights2, const CameraParams& camera,
                    RngStream& rng) {
  auto render = [&](double photons, const std::vector<double>& w,
                    std::vector<double>& out) {
    out.resize(w.size());
    for (std::size_t j = 0; j < w.size(); ++j)
      out[j] = photons * w[j] / camera.sensitivity + camera.offset;
    if (camera.read_noise > 0.0) {
      std::normal_distribution<double> noise(0.0, camera.read_noise);
      for (double& v : out) v += noise(rng);
    }
    if (camera.quantize) {
      // nearbyint under the default FP environment rounds half to even; a
      // real ADC also cannot report below 0.
      for (double& v : out) v = std::max(0.0, std::nearbyint(v));
    }
  };
  render(frame.n1, weights1, frame.raw1);
  render(frame.n2, weights2, frame.raw2);
  frame.n1 = 0.0;
  frame.n2 = 0.0;
}

RoiSpec make_roi(double center, double width, int pixels, double half_width_sigmas) {
  if (!(width > 0.0)) throw DomainError("make_roi: width must be > 0");
  if (!(half_width_sigmas > 0.0))
    throw DomainError("make_roi: half_width_sigmas must be > 0");
  RoiSpec roi;
  roi.center_px = center;
  roi.width_px = width;
  const double half = half_width_sigmas * width;
  roi.lo_px = std::max(0, static_cast<int>(std::floor(center - half)));
  roi.hi_px = std::min(pixels - 1, static_cast<int>(std::ceil(center + half)) - 1);
  if (roi.hi_px < roi.lo_px) roi.hi_px = roi.lo_px;
  return roi;
}

double capture_fraction(const RoiSpec& roi) {
  if (!(roi.width_px > 0.0))
    throw DomainError("capture_fraction: roi width must be > 0");
  const double lo = (static_cast<double>(roi.lo_px) - roi.center_px) / roi.width_px;
  const double hi =
      (static_cast<double>(roi.hi_px) + 1.0 - roi.center_px) / roi.width_px;
  return normal_cdf(hi) - normal_cdf(lo);
}

std::vector<RoiSpec> fit_beam_profile(const BinnedFrame& frame,
                                      double half_width_sigmas) {
  const int P = static_cast<int>(frame.pixels.size());
  if (P < 16) throw DomainError("fit_beam_profile: frame must have >= 16 pixels");

  const double baseline = median_of(frame.pixels);
  std::vector<double> absdev(frame.pixels.size());
  for (std::size_t j = 0; j < frame.pixels.size(); ++j)
    absdev[j] = std::fabs(frame.pixels[j] - baseline);
  const double noise_floor = 1.4826 * median_of(absdev);

  std::vector<double> residual(frame.pixels.size());
  for (std::size_t j = 0; j < frame.pixels.size(); ++j)
    residual[j] = frame.pixels[j] - baseline;

  // A flat frame must not pass: demand a strictly positive rise even when
  // the robust noise estimate is 0 (noiseless synthetic data).
  const double min_rise =
      5.0 * noise_floor + 1e-9 * std::max(1.0, std::fabs(baseline));

  std::vector<GaussianCurve> peaks;
  // Subtracting a fitted Gaussian leaves a small mismatch against the
  // pixel-integrated data (~1e-6 of the amplitude). On noiseless frames that
  // residue can top min_rise, so a second peak must also clear a fraction of
  // the strongest peak already found.
  double amp_floor = 0.0;
  for (int pass = 0; pass < 2; ++pass) {
    const auto it = std::max_element(residual.begin(), residual.end());
    const int peak_px = static_cast<int>(it - residual.begin());
    const double peak_val = *it;
    if (peak_val <= std::max(min_rise, amp_floor)) break;

    // Rough support of the peak: walk out to the 10% height contour.
    int lo = peak_px;
    int hi = peak_px;
    const double cut = 0.1 * peak_val;
    while (lo > 0 && residual[static_cast<std::size_t>(lo - 1)] > cut) --lo;
    while (hi < P - 1 && residual[static_cast<std::size_t>(hi + 1)] > cut) ++hi;

    double wsum = 0.0, m0 = 0.0;
    for (int j = lo; j <= hi; ++j) {
      const double r = std::max(0.0, residual[static_cast<std::size_t>(j)]);
      wsum += r;
      m0 += r * (static_cast<double>(j) + 0.5);
    }
    if (wsum <= 0.0) break;
    m0 /= wsum;
    double var0 = 0.0;
    for (int j = lo; j <= hi; ++j) {
      const double r = std::max(0.0, residual[static_cast<std::size_t>(j)]);
      const double d = static_cast<double>(j) + 0.5 - m0;
      var0 += r * d * d;
    }
    const double s0 = std::max(0.5, std::sqrt(var0 / wsum));

    const int fit_lo = std::max(0, static_cast<int>(std::floor(m0 - 6.0 * s0)));
    const int fit_hi = std::min(P - 1, static_cast<int>(std::ceil(m0 + 6.0 * s0)));
    std::vector<double> xs, ys;
    xs.reserve(static_cast<std::size_t>(fit_hi - fit_lo + 1));
    ys.reserve(xs.capacity());
    for (int j = fit_lo; j <= fit_hi; ++j) {
      xs.push_back(static_cast<double>(j) + 0.5);
      ys.push_back(residual[static_cast<std::size_t>(j)]);
    }
    const GaussianCurve fit = fit_gaussian_curve(xs, ys, peak_val, m0, s0);
    peaks.push_back(fit);
    amp_floor = std::max(amp_floor, 0.01 * fit.amplitude);

    for (int j = 0; j < P; ++j) {
      const double z = (static_cast<double>(j) + 0.5 - fit.mean) / fit.sigma;
      residual[static_cast<std::size_t>(j)] -=
          fit.amplitude * std::exp(-0.5 * z * z);
    }
  }

  if (peaks.empty())
    throw DetectionError(
        "fit_beam_profile: no peak rises 5x above the background noise floor");

  std::vector<RoiSpec> rois;
  rois.reserve(peaks.size());
  for (const auto& p : peaks)
    rois.push_back(make_roi(p.mean, p.sigma, P, half_width_sigmas));
  std::sort(rois.begin(), rois.end(),
            [](const RoiSpec& a, const RoiSpec& b) { return a.center_px < b.center_px; });
  if (rois.size() == 2 && rois[0].hi_px >= rois[1].lo_px) {
    std::ostringstream os;
    os << "fit_beam_profile: beam windows overlap ([" << rois[0].lo_px << ", "
       << rois[0].hi_px << "] and [" << rois[1].lo_px << ", " << rois[1].hi_px
       << "]); beams too close for the requested span";
    throw ConfigurationError(os.str());
  }
  return rois;
}

double integrate_roi(const BinnedFrame& frame, const RoiSpec& roi,
                     const CameraParams& camera) {
  if (roi.lo_px < 0 || roi.hi_px < roi.lo_px ||
      roi.hi_px >= static_cast<int>(frame.pixels.size())) {
    std::ostringstream os;
    os << "integrate_roi: roi [" << roi.lo_px << ", " << roi.hi_px
       << "] outside frame of " << frame.pixels.size() << " pixels";
    throw DomainError(os.str());
  }
  if (!(camera.sensitivity > 0.0))
    throw DomainError("integrate_roi: camera sensitivity must be > 0");
  return sum_window(frame.pixels, roi.lo_px, roi.hi_px, camera.offset,
                    camera.sensitivity);
}

std::vector<RoiSpec> recover_counts(FrameBatch& batch, const CameraParams& camera,
                                    double half_width_sigmas, std::size_t fit_frames) {
  if (batch.frames.empty())
    throw InsufficientDataError("recover_counts: empty batch");
  const std::size_t P1 = batch.frames.front().raw1.size();
  const std::size_t P2 = batch.frames.front().raw2.size();
  if (P1 == 0 || P2 == 0)
    throw InsufficientDataError("recover_counts: batch carries no pixel data");
  for (const auto& fr : batch.frames)
    if (fr.raw1.size() != P1 || fr.raw2.size() != P2)
      throw InconsistencyError("recover_counts: frames have mismatched strip sizes");

  const std::size_t n_fit = std::min(fit_frames, batch.frames.size());
  auto fit_arm = [&](bool arm1, std::size_t P) {
    BinnedFrame mean_frame;
    mean_frame.pixels.assign(P, 0.0);
    for (std::size_t i = 0; i < n_fit; ++i) {
      const auto& raw = arm1 ? batch.frames[i].raw1 : batch.frames[i].raw2;
      for (std::size_t j = 0; j < P; ++j) mean_frame.pixels[j] += raw[j];
    }
    for (double& v : mean_frame.pixels) v /= static_cast<double>(n_fit);
    auto rois = fit_beam_profile(mean_frame, half_width_sigmas);
    if (rois.size() != 1)
      throw ConfigurationError(
          "recover_counts: expected a single beam per arm strip");
    return rois.front();
  };
  const RoiSpec roi1 = fit_arm(true, P1);
  const RoiSpec roi2 = fit_arm(false, P2);

  const double cap1 = capture_fraction(roi1);
  const double cap2 = capture_fraction(roi2);
  for (auto& fr : batch.frames) {
    fr.n1 = sum_window(fr.raw1, roi1.lo_px, roi1.hi_px, camera.offset,
                       camera.sensitivity) /
            cap1;
    fr.n2 = sum_window(fr.raw2, roi2.lo_px, roi2.hi_px, camera.offset,
                       camera.sensitivity) /
            cap2;
  }
  return {roi1, roi2};
}

namespace {

void write_params(std::ostream& os, const ParamsSnapshot& ps) {
  os << "source.mu=" << format_double(ps.source.mu) << "\n";
  os << "source.eta1=" << format_double(ps.source.eta1) << "\n";
  os << "source.eta2=" << format_double(ps.source.eta2) << "\n";
  os << "source.excess_noise=" << format_double(ps.source.excess_noise) << "\n";
  os << "source.bg1=" << format_double(ps.source.bg1) << "\n";
  os << "source.bg2=" << format_double(ps.source.bg2) << "\n";
  os << "sample.alpha=" << format_double(ps.sample.alpha) << "\n";
  if (ps.camera) {
    os << "camera=present\n";
    os << "camera.sensitivity=" << format_double(ps.camera->sensitivity) << "\n";
    os << "camera.offset=" << format_double(ps.camera->offset) << "\n";
    os << "camera.read_noise=" << format_double(ps.camera->read_noise) << "\n";
    os << "camera.quantize=" << (ps.camera->quantize ? 1 : 0) << "\n";
  } else {
    os << "camera=absent\n";
  }
  if (ps.geometry) {
    os << "geometry=present\n";
    os << "geometry.pixels=" << ps.geometry->pixels << "\n";
    os << "geometry.center1=" << format_double(ps.geometry->center1) << "\n";
    os << "geometry.width1=" << format_double(ps.geometry->width1) << "\n";
    os << "geometry.center2=" << format_double(ps.geometry->center2) << "\n";
    os << "geometry.width2=" << format_double(ps.geometry->width2) << "\n";
    os << "geometry.exposure_s=" << format_double(ps.geometry->exposure_s) << "\n";
  } else {
    os << "geometry=absent\n";
  }
}

class LineReader {
 public:
  explicit LineReader(std::vector<std::string> lines) : lines_(std::move(lines)) {}

  bool done() const { return next_ >= lines_.size(); }
  std::size_t line_no() const { return next_; } // 1-based number of the line just read

  std::string_view take() {
    if (done()) throw ParseError("unexpected end of file");
    return trim(lines_[next_++]);
  }

  [[noreturn]] void fail(const std::string& why) const {
    std::ostringstream os;
    os << "line " << next_ << ": " << why;
    throw ParseError(os.str());
  }

 private:
  std::vector<std::string> lines_;
  std::size_t next_ = 0;
};

std::string_view expect_key(LineReader& in, std::string_view key) {
  if (in.done()) {
    std::ostringstream os;
    os << "file truncated; missing '" << key << "'";
    throw ParseError(os.str());
  }
  const std::string_view line = in.take();
  const std::size_t eq = line.find('=');
  if (eq == std::string_view::npos || trim(line.substr(0, eq)) != key) {
    std::ostringstream os;
    os << "expected '" << key << "=...', got '" << line << "'";
    in.fail(os.str());
  }
  return trim(line.substr(eq + 1));
}

bool expect_presence(LineReader& in, std::string_view key) {
  const std::string_view v = expect_key(in, key);
  if (v == "present") return true;
  if (v == "absent") return false;
  std::ostringstream os;
  os << "'" << key << "' must be present or absent, got '" << v << "'";
  in.fail(os.str());
}

std::vector<double> parse_pixel_row(std::string_view seg, std::size_t line_no,
                                    const char* arm) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos < seg.size()) {
    std::size_t sp = seg.find(' ', pos);
    if (sp == std::string_view::npos) sp = seg.size();
    if (sp > pos) {
      std::ostringstream what;
      what << "line " << line_no << " " << arm << " pixel " << out.size();
      out.push_back(parse_double(seg.substr(pos, sp - pos), what.str()));
    }
    pos = sp + 1;
  }
  return out;
}

} // namespace

void save_batch(const FrameBatch& batch, const std::string& path) {
  if (batch.frames.empty()) throw InsufficientDataError("save_batch: empty batch");
  const bool pixels = batch.frames.front().has_raw();
  for (const auto& fr : batch.frames)
    if (fr.has_raw() != pixels)
      throw InconsistencyError(
          "save_batch: batch mixes frames with and without pixel data");

  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("save_batch: cannot open '" + path + "' for writing");

  os << "format=" << kFormatTag << "\n";
  os << "kind=" << (pixels ? "pixels" : "counts") << "\n";
  os << "seed=" << format_u64(batch.seed) << "\n";
  os << "params=" << (batch.params ? "present" : "absent") << "\n";
  if (batch.params) write_params(os, *batch.params);
  os << "n_frames=" << batch.frames.size() << "\n";
  os << "begin_frames\n";
  for (const auto& fr : batch.frames) {
    os << format_double(fr.n1) << "," << format_double(fr.n2);
    if (pixels) {
      os << "|";
      for (std::size_t j = 0; j < fr.raw1.size(); ++j) {
        if (j) os << " ";
        os << format_double(fr.raw1[j]);
      }
      os << "|";
      for (std::size_t j = 0; j < fr.raw2.size(); ++j) {
        if (j) os << " ";
        os << format_double(fr.raw2[j]);
      }
    }
    os << "\n";
  }
  os << "end_frames\n";
  if (!os) throw Error("save_batch: write to '" + path + "' failed");
}

FrameBatch load_batch(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("load_batch: cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) lines.push_back(line);
  LineReader in(std::move(lines));

  const std::string_view fmt = expect_key(in, "format");
  if (fmt != kFormatTag) {
    std::ostringstream os;
    os << "unsupported batch format '" << fmt << "' (this build reads "
       << kFormatTag << ")";
    throw VersionError(os.str());
  }

  const std::string_view kind = expect_key(in, "kind");
  const bool pixels = kind == "pixels";
  if (!pixels && kind != "counts") {
    std::ostringstream os;
    os << "unknown kind '" << kind << "'";
    in.fail(os.str());
  }

  FrameBatch batch;
  batch.seed = parse_u64(expect_key(in, "seed"), "seed");
  if (expect_presence(in, "params")) {
    ParamsSnapshot ps;
    ps.source.mu = parse_double(expect_key(in, "source.mu"), "source.mu");
    ps.source.eta1 = parse_double(expect_key(in, "source.eta1"), "source.eta1");
    ps.source.eta2 = parse_double(expect_key(in, "source.eta2"), "source.eta2");
    ps.source.excess_noise =
        parse_double(expect_key(in, "source.excess_noise"), "source.excess_noise");
    ps.source.bg1 = parse_double(expect_key(in, "source.bg1"), "source.bg1");
    ps.source.bg2 = parse_double(expect_key(in, "source.bg2"), "source.bg2");
    ps.sample.alpha = parse_double(expect_key(in, "sample.alpha"), "sample.alpha");
    if (expect_presence(in, "camera")) {
      CameraParams cam;
      cam.sensitivity =
          parse_double(expect_key(in, "camera.sensitivity"), "camera.sensitivity");
      cam.offset = parse_double(expect_key(in, "camera.offset"), "camera.offset");
      cam.read_noise =
          parse_double(expect_key(in, "camera.read_noise"), "camera.read_noise");
      cam.quantize = parse_u64(expect_key(in, "camera.quantize"), "camera.quantize") != 0;
      ps.camera = cam;
    }
    if (expect_presence(in, "geometry")) {
      SpotGeometry g;
      g.pixels = static_cast<int>(
          parse_i64(expect_key(in, "geometry.pixels"), "geometry.pixels"));
      g.center1 = parse_double(expect_key(in, "geometry.center1"), "geometry.center1");
      g.width1 = parse_double(expect_key(in, "geometry.width1"), "geometry.width1");
      g.center2 = parse_double(expect_key(in, "geometry.center2"), "geometry.center2");
      g.width2 = parse_double(expect_key(in, "geometry.width2"), "geometry.width2");
      g.exposure_s =
          parse_double(expect_key(in, "geometry.exposure_s"), "geometry.exposure_s");
      ps.geometry = g;
    }
    batch.params = std::move(ps);
  }

  const std::uint64_t n_frames = parse_u64(expect_key(in, "n_frames"), "n_frames");
  if (in.done() || in.take() != "begin_frames")
    in.fail("expected 'begin_frames'");

  batch.frames.reserve(n_frames);
  for (std::uint64_t i = 0; i < n_frames; ++i) {
    if (in.done()) {
      std::ostringstream os;
      os << "file truncated inside frame section: got " << i << " of "
         << n_frames << " frames before end of file";
      throw ParseError(os.str());
    }
    const std::string_view row = in.take();
    const std::size_t line_no = in.line_no();
    if (row == "end_frames") {
      std::ostringstream os;
      os << "frame section too short: got " << i << " of " << n_frames << " frames";
      in.fail(os.str());
    }
    FrameRecord fr;
    std::string_view counts = row;
    if (pixels) {
      const std::size_t bar1 = row.find('|');
      const std::size_t bar2 = bar1 == std::string_view::npos
                                   ? std::string_view::npos
                                   : row.find('|', bar1 + 1);
      if (bar2 == std::string_view::npos) {
        std::ostringstream os;
        os << "pixel row needs two '|' separators, got '"
           << row.substr(0, std::min<std::size_t>(row.size(), 40)) << "...'";
        in.fail(os.str());
      }
      counts = row.substr(0, bar1);
      fr.raw1 = parse_pixel_row(row.substr(bar1 + 1, bar2 - bar1 - 1), line_no, "arm1");
      fr.raw2 = parse_pixel_row(row.substr(bar2 + 1), line_no, "arm2");
    }
    const std::size_t comma = counts.find(',');
    if (comma == std::string_view::npos) in.fail("frame row needs 'n1,n2'");
    std::ostringstream w1, w2;
    w1 << "line " << line_no << " n1";
    w2 << "line " << line_no << " n2";
    fr.n1 = parse_double(counts.substr(0, comma), w1.str());
    fr.n2 = parse_double(counts.substr(comma + 1), w2.str());
    batch.frames.push_back(std::move(fr));
  }

  if (in.done() || in.take() != "end_frames") in.fail("expected 'end_frames'");
  while (!in.done()) {
    if (!in.take().empty()) in.fail("unexpected content after end_frames");
  }
  return batch;
}

} // namespace twinbeam
