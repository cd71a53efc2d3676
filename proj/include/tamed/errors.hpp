#ifndef TAMED_ERRORS_HPP
#define TAMED_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace tamed {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fields on different grids, wrong array sizes, broken Hermitian pairing.
class StructuralError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain (negative r, negative control value, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class UnsupportedOrderError : public Error {
 public:
  explicit UnsupportedOrderError(int m)
      : Error("unsupported Sobolev order " + std::to_string(m) + " (expected 0, 1 or 2)") {}
};

// Invalid configuration or input file; maps to CLI exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Nonfinite state encountered while integrating.
class BlowupError : public Error {
 public:
  BlowupError(const std::string& what, double last_good_time)
      : Error(what), last_good_time_(last_good_time) {}
  double last_good_time() const noexcept { return last_good_time_; }

 private:
  double last_good_time_;
};

class IterationError : public Error {
 public:
  IterationError(const std::string& what, std::vector<double> residuals)
      : Error(what), residuals_(std::move(residuals)) {}
  const std::vector<double>& residuals() const noexcept { return residuals_; }

 private:
  std::vector<double> residuals_;
};

}  // namespace tamed

#endif  // TAMED_ERRORS_HPP
