#pragma once
#include <stdexcept>
#include <string>

namespace twinbeam {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string &what) : std::runtime_error(what) {}
};

/// A parameter lies outside its documented domain. The message names the field.
class DomainError : public Error {
public:
  using Error::Error;
};

/// Too few frames or estimates to compute the requested statistic.
class InsufficientDataError : public Error {
public:
  using Error::Error;
};

/// Calibration input carries no usable variance structure (e.g. Var(N2) = 0).
class DegenerateCalibrationError : public Error {
public:
  using Error::Error;
};

/// Estimate sequence does not match the declared series protocol.
class ProtocolError : public Error {
public:
  using Error::Error;
};

/// Measurements are mutually incompatible (e.g. inferred efficiency > 1).
class InconsistencyError : public Error {
public:
  using Error::Error;
};

/// Least-squares fit failed to converge; carries the final residual sum.
class FitError : public Error {
public:
  FitError(const std::string &what, double residual)
      : Error(what + " (residual sum of squares " + std::to_string(residual) + ")"),
        residual_sum(residual) {}
  double residual_sum;
};

/// No peak found where the input was expected to contain one.
class DetectionError : public Error {
public:
  using Error::Error;
};

/// Inputs are individually valid but jointly unusable (overlapping ROIs,
/// bad config field). The message names the offending field or object.
class ConfigurationError : public Error {
public:
  using Error::Error;
};

/// Malformed file input; the message carries line/field diagnostics.
class ParseError : public Error {
public:
  using Error::Error;
};

/// File declares a format version this build does not understand.
class VersionError : public Error {
public:
  using Error::Error;
};

} // namespace twinbeam
