#include "twinbeam/model.hpp"

#include <algorithm>
#include <random>
#include <sstream>
#include <thread>

#include "twinbeam/errors.hpp"
#include "twinbeam/frames.hpp"

namespace twinbeam {

namespace {

[[noreturn]] void bad_field(const char* type, const char* field, double got,
                            const char* constraint) {
  std::ostringstream os;
  os << type << "." << field << " must be " << constraint << " (got " << got << ")";
  throw DomainError(os.str());
}

void check_range(const char* type, const char* field, double v, double lo, double hi) {
  if (!(v >= lo && v <= hi)) {
    std::ostringstream os;
    os << "in [" << lo << ", " << hi << "]";
    bad_field(type, field, v, os.str().c_str());
  }
}

long long sample_poisson(double mean, RngStream& rng) {
  if (mean <= 0.0) return 0;
  std::poisson_distribution<long long> d(mean);
  return d(rng);
}

// Binomial with the floating-point safety net the raw distribution lacks:
// probabilities that land epsilon outside [0,1] after arithmetic are legal
// inputs here and map to the nearest degenerate case.
long long sample_binomial(long long n, double p, RngStream& rng) {
  if (n <= 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  std::binomial_distribution<long long> d(n, p);
  return d(rng);
}

} // namespace

void validate(const SourceParams& p) {
  if (!(p.mu > 0.0)) bad_field("SourceParams", "mu", p.mu, "> 0");
  // A zero-efficiency arm would only ever produce empty frames; reject it
  // here instead of letting calibration fail with a less direct message.
  if (!(p.eta1 > 0.0 && p.eta1 <= 1.0))
    bad_field("SourceParams", "eta1", p.eta1, "in (0, 1]");
  if (!(p.eta2 > 0.0 && p.eta2 <= 1.0))
    bad_field("SourceParams", "eta2", p.eta2, "in (0, 1]");
  if (!(p.excess_noise >= 0.0))
    bad_field("SourceParams", "excess_noise", p.excess_noise, ">= 0");
  if (!(p.bg1 >= 0.0)) bad_field("SourceParams", "bg1", p.bg1, ">= 0");
  if (!(p.bg2 >= 0.0)) bad_field("SourceParams", "bg2", p.bg2, ">= 0");
}

void validate(const SampleParams& p) {
  check_range("SampleParams", "alpha", p.alpha, 0.0, 1.0);
}

void validate(const CameraParams& p) {
  if (!(p.sensitivity > 0.0)) bad_field("CameraParams", "sensitivity", p.sensitivity, "> 0");
  if (!(p.offset >= 0.0)) bad_field("CameraParams", "offset", p.offset, ">= 0");
  if (!(p.read_noise >= 0.0)) bad_field("CameraParams", "read_noise", p.read_noise, ">= 0");
}

void validate(const SpotGeometry& g) {
  if (g.pixels < 16) bad_field("SpotGeometry", "pixels", g.pixels, ">= 16");
  if (!(g.width1 > 0.0)) bad_field("SpotGeometry", "width1", g.width1, "> 0");
  if (!(g.width2 > 0.0)) bad_field("SpotGeometry", "width2", g.width2, "> 0");
  check_range("SpotGeometry", "center1", g.center1, 0.0, g.pixels);
  check_range("SpotGeometry", "center2", g.center2, 0.0, g.pixels);
  if (!(g.exposure_s > 0.0)) bad_field("SpotGeometry", "exposure_s", g.exposure_s, "> 0");
}

FrameRecord generate_frame(const SourceParams& source, const SampleParams& sample,
                           RngStream& rng) {
  validate(source);
  validate(sample);

  double gain = 1.0;
  if (source.excess_noise > 0.0) {
    const double shape = 1.0 / source.excess_noise;
    std::gamma_distribution<double> g(shape, source.excess_noise);
    gain = g(rng);
  }

  const long long pairs = sample_poisson(source.mu * gain, rng);

  const double p1 = source.eta1 * (1.0 - sample.alpha);
  const double p2 = source.eta2;
  const double p11 = p1 * p2;
  const double p10 = p1 * (1.0 - p2);
  const double p01 = (1.0 - p1) * p2;

  // Multinomial over (both, only 1, only 2, neither) as a chain of
  // conditional binomials; each conditional probability is renormalized by
  // the mass not yet assigned.
  const long long n11 = sample_binomial(pairs, p11, rng);
  long long rest = pairs - n11;
  const double q10 = (1.0 - p11) > 0.0 ? p10 / (1.0 - p11) : 0.0;
  const long long n10 = sample_binomial(rest, q10, rng);
  rest -= n10;
  const double q01 = (1.0 - p11 - p10) > 0.0 ? p01 / (1.0 - p11 - p10) : 0.0;
  const long long n01 = sample_binomial(rest, q01, rng);

  FrameRecord fr;
  fr.n1 = static_cast<double>(n11 + n10 + sample_poisson(source.bg1, rng));
  fr.n2 = static_cast<double>(n11 + n01 + sample_poisson(source.bg2, rng));
  return fr;
}

FrameBatch generate_batch(const SourceParams& source, const SampleParams& sample,
                          const std::optional<CameraParams>& camera,
                          std::size_t n_frames, std::uint64_t seed, int threads,
                          const SpotGeometry& geometry) {
  if (n_frames < 1) throw DomainError("generate_batch: n_frames must be >= 1");
  validate(source);
  validate(sample);
  if (camera) {
    validate(*camera);
    validate(geometry);
  }

  std::vector<double> w1, w2;
  if (camera) {
    w1 = spot_unit_weights(geometry.pixels, geometry.center1, geometry.width1);
    w2 = spot_unit_weights(geometry.pixels, geometry.center2, geometry.width2);
  }

  FrameBatch batch;
  batch.seed = seed;
  batch.frames.resize(n_frames);
  batch.params = ParamsSnapshot{source, sample, camera,
                                camera ? std::optional<SpotGeometry>(geometry)
                                       : std::nullopt};

  // Frame i is fully determined by RngStream(seed, i), so slicing the index
  // range across threads cannot change the result.
  auto fill = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      RngStream rng(seed, static_cast<std::uint64_t>(i));
      batch.frames[i] = generate_frame(source, sample, rng);
      if (camera) synthesize_raw(batch.frames[i], w1, w2, *camera, rng);
    }
  };

  unsigned n_threads = threads > 0 ? static_cast<unsigned>(threads)
                                   : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(n_frames));
  if (n_threads <= 1) {
    fill(0, n_frames);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
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

FrameBatch generate_independent_batch(double mean1, double mean2,
                                      std::size_t n_frames, std::uint64_t seed) {
  if (n_frames < 1)
    throw DomainError("generate_independent_batch: n_frames must be >= 1");
  if (!(mean1 >= 0.0) || !(mean2 >= 0.0))
    throw DomainError("generate_independent_batch: means must be >= 0");

  FrameBatch batch;
  batch.seed = seed;
  batch.frames.resize(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    RngStream rng(seed, static_cast<std::uint64_t>(i));
    batch.frames[i].n1 = static_cast<double>(sample_poisson(mean1, rng));
    batch.frames[i].n2 = static_cast<double>(sample_poisson(mean2, rng));
  }
  return batch;
}

double loss_budget(const std::vector<double>& factors) {
  double product = 1.0;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (!(factors[i] >= 0.0 && factors[i] <= 1.0)) {
      std::ostringstream os;
      os << "loss_budget: factor " << i << " = " << factors[i]
         << " outside [0, 1]";
      throw DomainError(os.str());
    }
    product *= factors[i];
  }
  return product;
}

double infer_detector_efficiency(double heralding_dut, double heralding_ref,
                                 double eta_ref) {
  auto check = [](const char* name, double v) {
    if (!(v > 0.0 && v <= 1.0)) {
      std::ostringstream os;
      os << "infer_detector_efficiency: " << name << " = " << v
         << " outside (0, 1]";
      throw DomainError(os.str());
    }
  };
  check("heralding_dut", heralding_dut);
  check("heralding_ref", heralding_ref);
  check("eta_ref", eta_ref);

  const double eta = eta_ref * heralding_dut / heralding_ref;
  if (eta > 1.0) {
    std::ostringstream os;
    os << "inferred efficiency " << eta
       << " exceeds 1; heralding ratios are incompatible with a physical detector";
    throw InconsistencyError(os.str());
  }
  return eta;
}

} // namespace twinbeam
