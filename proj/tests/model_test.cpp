#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "test_util.hpp"
#include "twinbeam/analysis.hpp"
#include "twinbeam/errors.hpp"
#include "twinbeam/model.hpp"
#include "twinbeam/rng.hpp"
#include "twinbeam/types.hpp"

using namespace twinbeam;

namespace {

std::vector<double> arm1(const FrameBatch& b) {
  std::vector<double> v;
  v.reserve(b.size());
  for (const auto& f : b.frames) v.push_back(f.n1);
  return v;
}

std::vector<double> arm2(const FrameBatch& b) {
  std::vector<double> v;
  v.reserve(b.size());
  for (const auto& f : b.frames) v.push_back(f.n2);
  return v;
}

} // namespace

TEST_CASE("parameter validation names the offending field") {
  SourceParams s;
  s.mu = -1.0;
  CHECK_THROWS_WITH_AS(validate(s), doctest::Contains("SourceParams.mu"), DomainError);
  s = SourceParams{};
  s.eta1 = 1.5;
  CHECK_THROWS_WITH_AS(validate(s), doctest::Contains("SourceParams.eta1"), DomainError);
  s = SourceParams{};
  s.eta2 = 0.0;
  CHECK_THROWS_WITH_AS(validate(s), doctest::Contains("SourceParams.eta2"), DomainError);
  s = SourceParams{};
  s.excess_noise = -0.1;
  CHECK_THROWS_WITH_AS(validate(s), doctest::Contains("SourceParams.excess_noise"),
                       DomainError);
  s = SourceParams{};
  s.bg2 = -2.0;
  CHECK_THROWS_WITH_AS(validate(s), doctest::Contains("SourceParams.bg2"), DomainError);

  SampleParams a;
  a.alpha = 1.0001;
  CHECK_THROWS_WITH_AS(validate(a), doctest::Contains("SampleParams.alpha"), DomainError);
  a.alpha = -0.2;
  CHECK_THROWS_AS(validate(a), DomainError);
  a.alpha = 0.0;
  CHECK_NOTHROW(validate(a));
  a.alpha = 1.0;
  CHECK_NOTHROW(validate(a));

  CameraParams c;
  c.sensitivity = 0.0;
  CHECK_THROWS_WITH_AS(validate(c), doctest::Contains("CameraParams.sensitivity"),
                       DomainError);
  c = CameraParams{};
  c.read_noise = -1.0;
  CHECK_THROWS_AS(validate(c), DomainError);

  SpotGeometry g;
  g.pixels = 0;
  CHECK_THROWS_WITH_AS(validate(g), doctest::Contains("SpotGeometry.pixels"), DomainError);
  g = SpotGeometry{};
  g.width1 = 0.0;
  CHECK_THROWS_AS(validate(g), DomainError);
}

TEST_CASE("lossless twin beams are perfectly correlated") {
  SourceParams src;
  src.mu = 1000.0;
  src.eta1 = 1.0;
  src.eta2 = 1.0;
  FrameBatch b = generate_batch(src, SampleParams{0.0}, std::nullopt, 500, 7);
  for (const auto& f : b.frames) CHECK(f.n1 == f.n2);
  CHECK(noise_reduction_factor(b) == doctest::Approx(0.0));
}

TEST_CASE("noise reduction factor 0.38 at matched 62% arms") {
  SourceParams src; // defaults: mu 1e6, eta 0.62
  FrameBatch b = generate_batch(src, SampleParams{0.0}, std::nullopt, 10000, 42, 4);
  const double sigma = noise_reduction_factor(b);
  CHECK(sigma == doctest::Approx(0.38).epsilon(0.0526)); // 0.38 +- 0.02
}

TEST_CASE("thinned means match mu*eta1*(1-alpha) and mu*eta2 across a grid") {
  struct Point {
    double mu, eta1, eta2, alpha, bg1, bg2;
  };
  const Point grid[] = {
      {1e5, 0.62, 0.62, 0.5, 0.0, 0.0},
      {1e5, 0.62, 0.62, 0.0, 0.0, 0.0},
      {5e4, 0.30, 0.80, 0.25, 0.0, 0.0},
      {2e4, 0.90, 0.45, 0.9, 50.0, 80.0},
  };
  std::uint64_t seed = 100;
  for (const auto& pt : grid) {
    SourceParams src;
    src.mu = pt.mu;
    src.eta1 = pt.eta1;
    src.eta2 = pt.eta2;
    src.bg1 = pt.bg1;
    src.bg2 = pt.bg2;
    const std::size_t n = 10000;
    FrameBatch b = generate_batch(src, SampleParams{pt.alpha}, std::nullopt, n, seed++);
    const double m1 = testutil::mean_of(arm1(b));
    const double m2 = testutil::mean_of(arm2(b));
    const double want1 = pt.mu * pt.eta1 * (1.0 - pt.alpha) + pt.bg1;
    const double want2 = pt.mu * pt.eta2 + pt.bg2;
    // detected counts are Poisson, so SE of the mean is sqrt(mean/n)
    CHECK(std::fabs(m1 - want1) < 4.0 * std::sqrt(want1 / n));
    CHECK(std::fabs(m2 - want2) < 4.0 * std::sqrt(want2 / n));
  }
}

TEST_CASE("arm covariance equals mu*p1*p2") {
  SourceParams src;
  src.mu = 1e5;
  src.eta1 = 0.62;
  src.eta2 = 0.62;
  const double alpha = 0.3;
  const std::size_t n = 20000;
  FrameBatch b = generate_batch(src, SampleParams{alpha}, std::nullopt, n, 17, 4);
  const double p1 = src.eta1 * (1.0 - alpha);
  const double p2 = src.eta2;
  const double want = src.mu * p1 * p2;
  const double got = testutil::cov_of(arm1(b), arm2(b));
  // SE of a sample covariance of jointly Poisson-like arms
  const double v1 = src.mu * p1, v2 = src.mu * p2;
  const double se = std::sqrt((v1 * v2 + want * want) / static_cast<double>(n));
  CHECK(std::fabs(got - want) < 4.0 * se);
}

TEST_CASE("excess noise inflates the variance by (p*mu*eps)^2 but not the mean") {
  SourceParams src;
  src.mu = 1e5;
  src.eta1 = 0.62;
  src.eta2 = 0.62;
  src.excess_noise = 4e-4;
  const std::size_t n = 40000;
  FrameBatch b = generate_batch(src, SampleParams{0.0}, std::nullopt, n, 23, 4);
  const double p = src.eta1;
  const double want_mean = src.mu * p;
  const double want_var = src.mu * p + p * p * src.mu * src.mu * src.excess_noise;
  const auto v1 = arm1(b);
  CHECK(std::fabs(testutil::mean_of(v1) - want_mean) <
        5.0 * std::sqrt(want_var / static_cast<double>(n)));
  CHECK(testutil::var_of(v1) == doctest::Approx(want_var).epsilon(0.10));
  // the common gain cancels in the arm difference, so sigma stays at 1-eta
  CHECK(noise_reduction_factor(b) == doctest::Approx(1.0 - src.eta1).epsilon(0.06));
}

TEST_CASE("independent arms sit at the shot-noise level sigma = 1") {
  FrameBatch b = generate_independent_batch(6.2e5, 6.2e5, 8000, 5);
  const double sigma = noise_reduction_factor(b);
  // sigma is a variance ratio; relative SE ~ sqrt(2/n)
  CHECK(std::fabs(sigma - 1.0) < 4.0 * std::sqrt(2.0 / 8000.0));
  CHECK(std::fabs(testutil::cov_of(arm1(b), arm2(b))) <
        4.0 * 6.2e5 / std::sqrt(8000.0));
}

TEST_CASE("same seed reproduces the batch bit for bit") {
  SourceParams src;
  src.mu = 1e4;
  FrameBatch a = generate_batch(src, SampleParams{0.2}, std::nullopt, 300, 99);
  FrameBatch b = generate_batch(src, SampleParams{0.2}, std::nullopt, 300, 99);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.frames[i].n1 == b.frames[i].n1);
    CHECK(a.frames[i].n2 == b.frames[i].n2);
  }
}

TEST_CASE("thread count does not change the output") {
  SourceParams src;
  src.mu = 5e4;
  src.excess_noise = 1e-4;
  FrameBatch a = generate_batch(src, SampleParams{0.1}, std::nullopt, 500, 31, 1);
  FrameBatch b = generate_batch(src, SampleParams{0.1}, std::nullopt, 500, 31, 4);
  FrameBatch c = generate_batch(src, SampleParams{0.1}, std::nullopt, 500, 31, 3);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.frames[i].n1 == b.frames[i].n1);
    CHECK(a.frames[i].n2 == b.frames[i].n2);
    CHECK(a.frames[i].n1 == c.frames[i].n1);
  }
}

TEST_CASE("disjoint seeds give uncorrelated sequences") {
  SourceParams src;
  src.mu = 1e4;
  const std::size_t n = 4000;
  FrameBatch a = generate_batch(src, SampleParams{0.0}, std::nullopt, n, 1);
  FrameBatch b = generate_batch(src, SampleParams{0.0}, std::nullopt, n, 2);
  const auto xa = arm1(a), xb = arm1(b);
  const double rho = testutil::cov_of(xa, xb) /
                     (testutil::sd_of(xa) * testutil::sd_of(xb));
  CHECK(std::fabs(rho) < 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("multinomial fast path matches per-pair Bernoulli sampling") {
  // Joint (n1, n2) distribution check at small mu where brute force is viable.
  const double mu = 8.0, eta1 = 0.62, eta2 = 0.62, alpha = 0.3;
  const std::size_t n = 20000;

  SourceParams src;
  src.mu = mu;
  src.eta1 = eta1;
  src.eta2 = eta2;
  FrameBatch fast = generate_batch(src, SampleParams{alpha}, std::nullopt, n, 404);

  std::map<long long, long long> h_fast, h_brute;
  for (const auto& f : fast.frames)
    ++h_fast[static_cast<long long>(f.n1) * 1000 + static_cast<long long>(f.n2)];
  RngStream rng(808, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const FrameRecord f = testutil::brute_force_frame(mu, eta1, eta2, alpha, rng);
    ++h_brute[static_cast<long long>(f.n1) * 1000 + static_cast<long long>(f.n2)];
  }
  const auto r = testutil::two_sample_chi2(h_fast, h_brute);
  INFO("chi2 = " << r.stat << " dof = " << r.dof << " p = " << r.p);
  CHECK(r.p > 0.01);
}

TEST_CASE("loss budget multiplies efficiency factors") {
  CHECK(loss_budget({}) == 1.0);
  CHECK(loss_budget({0.80, 0.98, 0.98, 0.96}) ==
        doctest::Approx(0.80 * 0.98 * 0.98 * 0.96).epsilon(1e-12));
  CHECK(loss_budget({0.72, 0.90}) == doctest::Approx(0.648).epsilon(1e-12));
  CHECK_THROWS_WITH_AS(loss_budget({0.9, 1.2}), doctest::Contains("1.2"),
                       DomainError);
  CHECK_THROWS_AS(loss_budget({-0.1}), DomainError);
}

TEST_CASE("detector efficiency inferred from heralding ratios") {
  CHECK(infer_detector_efficiency(0.62, 0.425, 0.62) ==
        doctest::Approx(0.904).epsilon(0.002));
  CHECK(infer_detector_efficiency(0.5, 0.5, 0.77) == doctest::Approx(0.77));
  CHECK_THROWS_AS(infer_detector_efficiency(0.9, 0.3, 0.5), InconsistencyError);
  CHECK_THROWS_AS(infer_detector_efficiency(0.0, 0.5, 0.5), DomainError);
  CHECK_THROWS_AS(infer_detector_efficiency(0.5, 0.5, 1.2), DomainError);
}

TEST_CASE("generate_batch rejects invalid parameters up front") {
  SourceParams bad;
  bad.eta1 = 0.0;
  CHECK_THROWS_AS(generate_batch(bad, SampleParams{0.0}, std::nullopt, 10, 1),
                  DomainError);
  SourceParams ok;
  CHECK_THROWS_AS(generate_batch(ok, SampleParams{-0.5}, std::nullopt, 10, 1),
                  DomainError);
}
