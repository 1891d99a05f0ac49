#ifndef HAFT_ERRORS_HPP
#define HAFT_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace haft {

/// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed user-supplied input: CSV contents, term syntax, config files.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A design matrix is rank deficient.  Carries the columns that the
/// pivoted decomposition identified as linearly dependent.
class SingularError : public Error {
 public:
  SingularError(const std::string& msg, std::vector<std::string> columns)
      : Error(msg), columns_(std::move(columns)) {}

  const std::vector<std::string>& columns() const { return columns_; }

 private:
  std::vector<std::string> columns_;
};

/// The likelihood is unbounded or the fit cannot be carried out at all
/// (all observations censored, degenerate perfect fit, ...).
class EstimationError : public Error {
 public:
  using Error::Error;
};

/// Adaptive quadrature exhausted its subdivision budget before reaching
/// the requested tolerance.  The best available estimate is attached.
class QuadratureError : public Error {
 public:
  QuadratureError(const std::string& msg, double best_estimate, double error_estimate)
      : Error(msg), best_estimate_(best_estimate), error_estimate_(error_estimate) {}

  double best_estimate() const { return best_estimate_; }
  double error_estimate() const { return error_estimate_; }

 private:
  double best_estimate_;
  double error_estimate_;
};

}  // namespace haft

#endif  // HAFT_ERRORS_HPP
