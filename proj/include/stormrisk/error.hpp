#pragma once

#include <stdexcept>
#include <string>

namespace stormrisk {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied data or parameters that violate a documented precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class TooFewEvents : public Error {
 public:
  using Error::Error;
};

class DegenerateSample : public Error {
 public:
  using Error::Error;
};

/// A monotone root search ran out of support without a sign change.
class BracketFailure : public Error {
 public:
  BracketFailure(const std::string& what, double lo, double hi, double f_lo, double f_hi)
      : Error(what + " (searched [" + std::to_string(lo) + ", " + std::to_string(hi) +
              "], residuals " + std::to_string(f_lo) + ", " + std::to_string(f_hi) + ")"),
        lo_(lo),
        hi_(hi) {}

  [[nodiscard]] double lo() const { return lo_; }
  [[nodiscard]] double hi() const { return hi_; }

 private:
  double lo_;
  double hi_;
};

/// The conditioning level has zero density under every covariate/effect value.
class UnsupportedConditioningValue : public Error {
 public:
  using Error::Error;
};

/// Initial state lies outside the support of the prior.
class PriorMismatch : public Error {
 public:
  using Error::Error;
};

/// Malformed input file; carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}

  [[nodiscard]] std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace stormrisk
