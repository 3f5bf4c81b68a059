#include "twinbeam/gaussian_fit.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <sstream>

#include "twinbeam/errors.hpp"

namespace twinbeam {

namespace {

double residual_sum_sq(const std::vector<double>& x, const std::vector<double>& y,
                       double a, double m, double s) {
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = (x[i] - m) / s;
    const double r = y[i] - a * std::exp(-0.5 * z * z);
    sum += r * r;
  }
  return sum;
}

// 3x3 linear solve with partial pivoting; returns false when singular.
bool solve3(std::array<std::array<double, 3>, 3> A, std::array<double, 3>& b) {
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::fabs(A[r][col]) > std::fabs(A[pivot][col])) pivot = r;
    if (std::fabs(A[pivot][col]) < 1e-300) return false;
    std::swap(A[col], A[pivot]);
    std::swap(b[col], b[pivot]);
    for (int r = col + 1; r < 3; ++r) {
      const double f = A[r][col] / A[col][col];
      for (int c = col; c < 3; ++c) A[r][c] -= f * A[col][c];
      b[r] -= f * b[col];
    }
  }
  for (int col = 2; col >= 0; --col) {
    for (int c = col + 1; c < 3; ++c) b[col] -= A[col][c] * b[c];
    b[col] /= A[col][col];
  }
  return true;
}

[[noreturn]] void fail(const char* why, double residual) {
  std::ostringstream os;
  os << "gaussian fit failed to converge: " << why;
  throw FitError(os.str(), residual);
}

} // namespace

GaussianCurve fit_gaussian_curve(const std::vector<double>& x,
                                 const std::vector<double>& y,
                                 double amplitude0, double mean0, double sigma0) {
  if (x.size() != y.size() || x.size() < 4)
    throw InsufficientDataError("gaussian fit needs >= 4 points of equal length");
  if (!(sigma0 != 0.0) || !std::isfinite(amplitude0) || !std::isfinite(mean0) ||
      !std::isfinite(sigma0))
    throw DomainError("gaussian fit initial guess must be finite with sigma != 0");

  double a = amplitude0;
  double m = mean0;
  double s = std::fabs(sigma0);
  double lambda = 1e-3;
  double chi2 = residual_sum_sq(x, y, a, m, s);

  constexpr int kMaxIter = 200;
  int iter = 0;
  for (; iter < kMaxIter; ++iter) {
    // Normal equations J^T J and J^T r for the current point.
    std::array<std::array<double, 3>, 3> JtJ{};
    std::array<double, 3> Jtr{};
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double z = (x[i] - m) / s;
      const double e = std::exp(-0.5 * z * z);
      const double r = y[i] - a * e;
      const std::array<double, 3> j = {e, a * e * z / s, a * e * z * z / s};
      for (int p = 0; p < 3; ++p) {
        Jtr[p] += j[p] * r;
        for (int q = p; q < 3; ++q) JtJ[p][q] += j[p] * j[q];
      }
    }
    for (int p = 0; p < 3; ++p)
      for (int q = 0; q < p; ++q) JtJ[p][q] = JtJ[q][p];

    bool stepped = false;
    while (lambda < 1e12) {
      auto A = JtJ;
      for (int p = 0; p < 3; ++p) A[p][p] *= 1.0 + lambda;
      auto delta = Jtr;
      if (solve3(A, delta)) {
        const double a2 = a + delta[0];
        const double m2 = m + delta[1];
        const double s2 = std::fabs(s + delta[2]);
        if (s2 > 0.0 && std::isfinite(a2) && std::isfinite(m2) && std::isfinite(s2)) {
          const double chi2_try = residual_sum_sq(x, y, a2, m2, s2);
          if (chi2_try <= chi2) {
            const double improvement = chi2 - chi2_try;
            a = a2;
            m = m2;
            s = s2;
            chi2 = chi2_try;
            lambda = std::max(lambda * 0.1, 1e-12);
            stepped = true;
            if (improvement <= 1e-12 * (chi2 + 1e-300)) iter = kMaxIter;
            break;
          }
        }
      }
      lambda *= 10.0;
    }
    if (!stepped) break;
  }

  if (lambda >= 1e12) fail("damping exhausted without a downhill step", chi2);
  if (!(s > 0.0) || !std::isfinite(chi2)) fail("degenerate parameters", chi2);

  GaussianCurve out;
  out.amplitude = a;
  out.mean = m;
  out.sigma = s;
  out.residual_sum = chi2;
  out.iterations = iter >= kMaxIter ? kMaxIter : iter + 1;
  return out;
}

} // namespace twinbeam
