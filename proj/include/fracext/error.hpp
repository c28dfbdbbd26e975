#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fracext {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument or precondition violation (s outside its range, t <= 0, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A requested construction exceeds the configured size limit.
class SizeLimitError : public Error {
 public:
  using Error::Error;
};

/// Graph structure violates an assumption (disconnected, bad index).
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Iterative method failed to converge.
class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& what, std::size_t index, double residual = 0.0)
      : Error(what), index_(index), residual_(residual) {}

  std::size_t index() const noexcept { return index_; }
  double residual() const noexcept { return residual_; }

 private:
  std::size_t index_;
  double residual_;
};

/// Truncated improper integral whose estimated tail exceeds the tolerance.
class QuadratureError : public Error {
 public:
  QuadratureError(const std::string& what, double defect) : Error(what), defect_(defect) {}
  double defect() const noexcept { return defect_; }

 private:
  double defect_;
};

/// y-mesh too coarse for the requested boundary-layer accuracy.
class ResolutionError : public Error {
 public:
  ResolutionError(const std::string& what, double estimate) : Error(what), estimate_(estimate) {}
  double estimate() const noexcept { return estimate_; }

 private:
  double estimate_;
};

/// Time window outside the range the discrete spectrum resolves.
class WindowError : public Error {
 public:
  using Error::Error;
};

/// Corrupt or mismatched cache / input file.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace fracext
