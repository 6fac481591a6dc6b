#pragma once

#include <stdexcept>
#include <string>

namespace warmsim {

class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed intensity, envelope or state (negative rate, unordered atoms, ...).
class InvalidSpec : public Error
{
  public:
    using Error::Error;
};

/// The distribution does not put total mass 1 on [0, inf).
class MassDeficient : public Error
{
  public:
    using Error::Error;
};

/// Quadrature or root finding failed to converge within budget.
class NumericFailure : public Error
{
  public:
    using Error::Error;
};

/// A moment or tail integral diverges.
class Divergent : public Error
{
  public:
    using Error::Error;
};

/// An envelope fit was rejected (too few usable points or a non-decaying curve).
class FitRejected : public Error
{
  public:
    using Error::Error;
};

/// Configuration document is malformed or violates the schema.
class ConfigError : public Error
{
  public:
    using Error::Error;
};

/// Reading a config or writing results failed.
class IoError : public Error
{
  public:
    using Error::Error;
};

} // namespace warmsim
