#pragma once

#include <stdexcept>
#include <string>

namespace survey {

//! Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

//! Invalid law or design parameters, or a violated precondition.
class ParameterError : public Error
{
public:
  using Error::Error;
};

//! A design whose conditional law is not defined (e.g. P(S = n) == 0).
class DegenerateDesignError : public Error
{
public:
  using Error::Error;
};

//! Zero or negative inclusion probability, or an empty sample.
class WeightError : public Error
{
public:
  using Error::Error;
};

//! The generalized inverse does not exist (total mass below alpha).
class QuantileUndefinedError : public Error
{
public:
  using Error::Error;
};

//! A density value needed by a variance or derivative formula is zero.
class UndefinedDerivativeError : public Error
{
public:
  using Error::Error;
};

//! Enumeration would exceed its size guard.
class CapacityError : public Error
{
public:
  CapacityError(const std::string& what, double requested, double limit)
    : Error(what + " (requested " + std::to_string(requested) + ", limit " +
            std::to_string(limit) + ")")
    , requested_(requested)
    , limit_(limit)
  {}

  double requested() const noexcept { return requested_; }
  double limit() const noexcept { return limit_; }

private:
  double requested_;
  double limit_;
};

//! p-from-pi calibration did not reach the tolerance.
class CalibrationError : public Error
{
public:
  CalibrationError(const std::string& what, double residual)
    : Error(what + " (residual " + std::to_string(residual) + ")")
    , residual_(residual)
  {}

  double residual() const noexcept { return residual_; }

private:
  double residual_;
};

//! Too many failed replications, or a diagnostic with no variance.
class ScenarioError : public Error
{
public:
  using Error::Error;
};

} // namespace survey
