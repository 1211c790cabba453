#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace cbfal {

/// Upper bound on state and input dimensions. Vectors are dynamically sized
/// up to this bound but stored inline, so evaluating functionals in the
/// integrator's inner loop never touches the heap.
inline constexpr int kMaxDim = 8;

using Vector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor, 1, kMaxDim>;
using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A history query reached before the earliest retained sample or past the
/// latest one.
class QueryOutsideSpan : public Error {
 public:
  using Error::Error;
};

class NonMonotoneTime : public Error {
 public:
  using Error::Error;
};

class MissingDerivativeHistory : public Error {
 public:
  using Error::Error;
};

class GradientMismatch : public Error {
 public:
  using Error::Error;
};

/// The functional cannot be turned into an extended barrier without
/// producing an advanced-type closed loop.
class NotExtendable : public Error {
 public:
  using Error::Error;
};

class UnknownScenario : public Error {
 public:
  using Error::Error;
};

class InvalidOverride : public Error {
 public:
  using Error::Error;
};

}  // namespace cbfal
