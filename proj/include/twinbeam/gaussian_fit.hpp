#pragma once
#include <vector>

namespace twinbeam {

struct GaussianCurve {
  double amplitude = 0.0;
  double mean = 0.0;
  double sigma = 0.0; ///< always reported positive
  double residual_sum = 0.0;
  int iterations = 0;
};

/// Least-squares fit of y = A * exp(-(x - m)^2 / (2 s^2)) by
/// Levenberg-Marquardt with an analytic Jacobian, starting from the given
/// initial guess. Throws FitError (carrying the residual sum of squares) if
/// the iteration fails to converge or the problem is degenerate.
GaussianCurve fit_gaussian_curve(const std::vector<double>& x,
                                 const std::vector<double>& y,
                                 double amplitude0, double mean0, double sigma0);

} // namespace twinbeam
