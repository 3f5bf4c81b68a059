#include "twinbeam/stats.hpp"

#include <cmath>

namespace twinbeam {

double mean(const std::vector<double>& x) {
  if (x.empty()) throw InsufficientDataError("mean of empty sample");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double variance(const std::vector<double>& x) {
  if (x.size() < 2) throw InsufficientDataError("variance needs at least 2 values");
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) {
    const double d = v - m;
    s += d * d;
  }
  return s / static_cast<double>(x.size() - 1);
}

double covariance(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size())
    throw InsufficientDataError("covariance of samples with unequal length");
  if (x.size() < 2) throw InsufficientDataError("covariance needs at least 2 values");
  const double mx = mean(x);
  const double my = mean(y);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - mx) * (y[i] - my);
  return s / static_cast<double>(x.size() - 1);
}

double standard_deviation(const std::vector<double>& x) { return std::sqrt(variance(x)); }

} // namespace twinbeam
