#pragma once
#include <cstddef>
#include <vector>

#include "twinbeam/errors.hpp"

namespace twinbeam {

double mean(const std::vector<double>& x);

/// Unbiased sample variance (n - 1 denominator). Requires at least 2 values.
double variance(const std::vector<double>& x);

/// Unbiased sample covariance (n - 1 denominator). Requires equal length >= 2.
double covariance(const std::vector<double>& x, const std::vector<double>& y);

double standard_deviation(const std::vector<double>& x);

} // namespace twinbeam
