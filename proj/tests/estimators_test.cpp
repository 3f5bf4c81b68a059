#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "test_util.hpp"
#include "twinbeam/errors.hpp"
#include "twinbeam/estimators.hpp"
#include "twinbeam/model.hpp"
#include "twinbeam/types.hpp"

using namespace twinbeam;

namespace {

FrameBatch stock_batch(double alpha, std::size_t n, std::uint64_t seed,
                       double excess = 0.0) {
  SourceParams src; // mu 1e6, eta 0.62
  src.excess_noise = excess;
  return generate_batch(src, SampleParams{alpha}, std::nullopt, n, seed, 4);
}

std::vector<double> values_of(const std::vector<AbsorptionEstimate>& est) {
  std::vector<double> v;
  v.reserve(est.size());
  for (const auto& e : est) v.push_back(e.alpha_hat);
  return v;
}

FrameRecord counts(double n1, double n2) {
  FrameRecord f;
  f.n1 = n1;
  f.n2 = n2;
  return f;
}

} // namespace

TEST_CASE("calibration captures means, gain constant and noise reduction") {
  FrameBatch b = stock_batch(0.0, 20000, 1);
  const Calibration cal = calibrate(b);

  CHECK(cal.n_frames_used == 20000);
  CHECK(cal.seed == 1);
  CHECK(cal.n1p_mean == doctest::Approx(6.2e5).epsilon(0.005));
  CHECK(cal.n2_mean == doctest::Approx(6.2e5).epsilon(0.005));
  CHECK(cal.sigma == doctest::Approx(0.38).epsilon(0.0526));
  // optimal gain: C * <N1> = Cov/Var2 = eta for twin Poisson beams
  CHECK(cal.C * cal.n1p_mean == doctest::Approx(0.62).epsilon(0.05));
  CHECK(cal.id != 0);
}

TEST_CASE("uncorrelated arms calibrate to zero gain and sigma 1") {
  FrameBatch b = generate_independent_batch(6.2e5, 6.2e5, 10000, 2);
  const Calibration cal = calibrate(b);
  // C*<N1> estimates Cov/Var2 whose SE is ~ sqrt(Var1/Var2)/sqrt(n) = 1/sqrt(n)
  CHECK(std::fabs(cal.C * cal.n1p_mean) < 4.0 / std::sqrt(10000.0));
  CHECK(std::fabs(cal.sigma - 1.0) < 4.0 * std::sqrt(2.0 / 10000.0));
}

TEST_CASE("calibration error contract") {
  FrameBatch empty;
  CHECK_THROWS_AS(calibrate(empty), InsufficientDataError);
  FrameBatch one;
  one.frames.push_back(counts(10, 10));
  CHECK_THROWS_AS(calibrate(one), InsufficientDataError);

  FrameBatch flat;
  flat.frames.push_back(counts(9, 10));
  flat.frames.push_back(counts(11, 10));
  flat.frames.push_back(counts(10, 10));
  CHECK_THROWS_AS(calibrate(flat), DegenerateCalibrationError);
}

TEST_CASE("direct estimator is 1 - n1/n1p_mean") {
  Calibration cal;
  cal.n1p_mean = 1000.0;
  cal.n2_mean = 1000.0;
  cal.n_frames_used = 100;
  cal.id = 7;
  CHECK(estimate_direct(counts(1000, 0), cal).alpha_hat == doctest::Approx(0.0));
  CHECK(estimate_direct(counts(0, 0), cal).alpha_hat == doctest::Approx(1.0));
  CHECK(estimate_direct(counts(950, 0), cal).alpha_hat ==
        doctest::Approx(0.05).epsilon(1e-12));
  const auto e = estimate_direct(counts(500, 0), cal);
  CHECK(e.kind == EstimatorKind::direct);
  CHECK(e.calibration_id == 7);
}

TEST_CASE("direct estimator is invariant under common count rescaling") {
  Calibration cal;
  cal.n1p_mean = 620000.0;
  cal.n2_mean = 620000.0;
  cal.n_frames_used = 100;
  const double a1 = estimate_direct(counts(590000, 0), cal).alpha_hat;
  Calibration scaled = cal;
  scaled.n1p_mean *= 3.5;
  const double a2 = estimate_direct(counts(590000 * 3.5, 0), scaled).alpha_hat;
  CHECK(a1 == doctest::Approx(a2).epsilon(1e-12));
}

TEST_CASE("corrected estimator reduces to direct when the gain is zero") {
  Calibration cal;
  cal.n1p_mean = 1000.0;
  cal.n2_mean = 900.0;
  cal.n_frames_used = 100;
  cal.C = 0.0;
  cal.deltaE = 0.0;
  const FrameRecord f = counts(950, 1100);
  CHECK(estimate_corrected(f, cal).alpha_hat ==
        doctest::Approx(estimate_direct(f, cal).alpha_hat).epsilon(1e-15));
}

TEST_CASE("corrected estimator subtracts the scaled reference fluctuation") {
  Calibration cal;
  cal.n1p_mean = 1000.0;
  cal.n2_mean = 800.0;
  cal.n_frames_used = 100;
  cal.C = 0.0005;
  cal.deltaE = 0.4;
  const FrameRecord f = counts(900, 850);
  // k = C*n1 = 0.45, dE = deltaE*n1/n1p = 0.36
  const double want = 1.0 - (900.0 - 0.45 * (850.0 - 800.0) + 0.36) / 1000.0;
  CHECK(estimate_corrected(f, cal).alpha_hat == doctest::Approx(want).epsilon(1e-12));
  CHECK(estimate_corrected(f, cal).kind == EstimatorKind::corrected);
}

TEST_CASE("differential estimator pins the gain to 1") {
  Calibration cal;
  cal.n1p_mean = 1000.0;
  cal.n2_mean = 800.0;
  cal.n_frames_used = 100;
  cal.C = 0.123; // must be ignored
  const FrameRecord f = counts(900, 850);
  const double want = 1.0 - (900.0 - (850.0 - 800.0)) / 1000.0;
  CHECK(estimate_differential(f, cal).alpha_hat == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("corrected estimator is unbiased across the absorption range") {
  FrameBatch ref = stock_batch(0.0, 50000, 11);
  const Calibration cal = calibrate(ref);
  for (double alpha : {0.0, 0.1, 0.5, 0.9}) {
    const std::size_t n = 20000;
    FrameBatch b = stock_batch(alpha, n, 1000 + static_cast<std::uint64_t>(alpha * 100));
    std::vector<double> est;
    est.reserve(n);
    for (const auto& f : b.frames)
      est.push_back(estimate_corrected(f, cal).alpha_hat);
    const double m = testutil::mean_of(est);
    const double se = testutil::sd_of(est) / std::sqrt(static_cast<double>(n));
    INFO("alpha = " << alpha << " mean = " << m << " se = " << se);
    CHECK(std::fabs(m - alpha) < 3.5 * se);
  }
}

TEST_CASE("correction removes the 1 - eta^2 noise share") {
  FrameBatch ref = stock_batch(0.0, 50000, 21);
  const Calibration cal = calibrate(ref);
  FrameBatch b = stock_batch(0.00599, 20000, 22);
  std::vector<double> direct, corrected;
  for (const auto& f : b.frames) {
    direct.push_back(estimate_direct(f, cal).alpha_hat);
    corrected.push_back(estimate_corrected(f, cal).alpha_hat);
  }
  const double ratio = testutil::var_of(corrected) / testutil::var_of(direct);
  // residual variance fraction for jointly thinned beams is 1 - eta^2
  CHECK(ratio == doctest::Approx(1.0 - 0.62 * 0.62).epsilon(0.05));
  CHECK(testutil::var_of(corrected) < testutil::var_of(direct));
}

TEST_CASE("calibrated gain minimizes the corrected variance") {
  FrameBatch ref = stock_batch(0.0, 50000, 31);
  const Calibration cal = calibrate(ref);
  FrameBatch b = stock_batch(0.3, 20000, 32);

  auto variance_at = [&](double scale) {
    Calibration c = cal;
    c.C = cal.C * scale;
    c.deltaE = cal.deltaE * scale;
    std::vector<double> est;
    est.reserve(b.size());
    for (const auto& f : b.frames) est.push_back(estimate_corrected(f, c).alpha_hat);
    return testutil::var_of(est);
  };

  const double at_cal = variance_at(1.0);
  CHECK(at_cal < variance_at(0.5));
  CHECK(at_cal < variance_at(1.5));
}

TEST_CASE("drift correction rescales the probe reference proportionally") {
  Calibration cal;
  cal.n1p_mean = 620000.0;
  cal.n2_mean = 620000.0;
  cal.C = 1e-6;
  cal.deltaE = 0.38;
  cal.sigma = 0.38;
  cal.n_frames_used = 1000;
  cal.seed = 5;

  const Calibration same = drift_correct(cal, cal.n2_mean);
  CHECK(same.n1p_mean == doctest::Approx(cal.n1p_mean).epsilon(1e-15));

  const Calibration up = drift_correct(cal, 1.02 * cal.n2_mean);
  CHECK(up.n1p_mean == doctest::Approx(1.02 * cal.n1p_mean).epsilon(1e-12));
  CHECK(up.n2_mean == doctest::Approx(1.02 * cal.n2_mean).epsilon(1e-12));
  CHECK(up.C == cal.C);
  CHECK(up.sigma == cal.sigma);
  CHECK(up.id != cal.id);
}

TEST_CASE("drift correction removes a 1% pump power bias") {
  SourceParams src;
  FrameBatch ref = generate_batch(src, SampleParams{0.0}, std::nullopt, 50000, 41, 4);
  const Calibration cal = calibrate(ref);

  SourceParams drifted = src;
  drifted.mu *= 1.01;
  const double alpha = 0.1;
  const std::size_t n = 20000;
  FrameBatch b = generate_batch(drifted, SampleParams{alpha}, std::nullopt, n, 42, 4);

  double n2_sum = 0.0;
  for (const auto& f : b.frames) n2_sum += f.n2;
  const Calibration corrected_cal = drift_correct(cal, n2_sum / static_cast<double>(n));

  std::vector<double> stale, fixed;
  for (const auto& f : b.frames) {
    stale.push_back(estimate_corrected(f, cal).alpha_hat);
    fixed.push_back(estimate_corrected(f, corrected_cal).alpha_hat);
  }
  const double bias_stale = testutil::mean_of(stale) - alpha;
  const double bias_fixed = testutil::mean_of(fixed) - alpha;
  const double se = testutil::sd_of(fixed) / std::sqrt(static_cast<double>(n));

  // uncorrected: mean alpha_hat = 1 - 1.01*(1-alpha), i.e. ~ -0.009 off
  CHECK(bias_stale == doctest::Approx(-0.01 * (1.0 - alpha)).epsilon(0.15));
  CHECK(std::fabs(bias_fixed) < 4.0 * se);
}

TEST_CASE("calibration text round-trips exactly") {
  FrameBatch b = stock_batch(0.0, 2000, 51);
  const Calibration cal = calibrate(b);
  const std::string text = calibration_to_text(cal);
  const Calibration back = calibration_from_text(text);
  CHECK(back.n1p_mean == cal.n1p_mean);
  CHECK(back.n2_mean == cal.n2_mean);
  CHECK(back.C == cal.C);
  CHECK(back.deltaE == cal.deltaE);
  CHECK(back.sigma == cal.sigma);
  CHECK(back.n_frames_used == cal.n_frames_used);
  CHECK(back.seed == cal.seed);
  CHECK(back.id == cal.id);
}

TEST_CASE("calibration text rejects missing, unknown and malformed keys") {
  FrameBatch b = stock_batch(0.0, 500, 61);
  std::string text = calibration_to_text(calibrate(b));

  CHECK_THROWS_WITH_AS(calibration_from_text("n1p_mean = 5\n"),
                       doctest::Contains("n2_mean"), ParseError);
  CHECK_THROWS_WITH_AS(calibration_from_text(text + "mystery = 1\n"),
                       doctest::Contains("mystery"), ParseError);
  CHECK_THROWS_AS(calibration_from_text("n1p_mean = banana\n"), ParseError);

  // comments and blank lines are tolerated
  const Calibration back = calibration_from_text("# header comment\n\n" + text);
  CHECK(back.n_frames_used == 500);
}

TEST_CASE("estimates carry the calibration identity") {
  FrameBatch b = stock_batch(0.0, 500, 71);
  const Calibration cal = calibrate(b);
  const auto e = estimate_corrected(b.frames.front(), cal);
  CHECK(e.calibration_id == cal.id);

  FrameBatch b2 = stock_batch(0.0, 500, 72);
  const Calibration cal2 = calibrate(b2);
  CHECK(cal2.id != cal.id);
}
