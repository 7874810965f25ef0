#pragma once

#include <stdexcept>
#include <string>

namespace dsse {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file could not be opened for reading.
class FileError : public Error {
 public:
  using Error::Error;
};

/// Malformed document (bad JSON, missing key, wrong type).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Network data violates a structural invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A measurement or document refers to a bus/line/end that does not exist.
class ReferenceError : public Error {
 public:
  using Error::Error;
};

/// Squared voltage dropped to zero or below during the sweep.
class VoltageCollapseError : public Error {
 public:
  VoltageCollapseError(const std::string& bus, int iteration)
      : Error("voltage collapse at bus '" + bus + "' in iteration " + std::to_string(iteration)),
        bus_(bus),
        iteration_(iteration) {}

  const std::string& bus() const noexcept { return bus_; }
  int iteration() const noexcept { return iteration_; }

 private:
  std::string bus_;
  int iteration_;
};

/// The exact power flow did not converge within the iteration budget.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Measurement set does not make the state observable.
class ObservabilityError : public Error {
 public:
  ObservabilityError(int rank, int required, int attempts)
      : Error("measurement set not observable: rank " + std::to_string(rank) + " of " +
              std::to_string(required) + " after " + std::to_string(attempts) + " draw(s)"),
        rank_(rank),
        required_(required),
        attempts_(attempts) {}

  int rank() const noexcept { return rank_; }
  int required() const noexcept { return required_; }
  int attempts() const noexcept { return attempts_; }

 private:
  int rank_;
  int required_;
  int attempts_;
};

/// Factorization found fewer independent columns than states.
class RankDeficiencyError : public Error {
 public:
  RankDeficiencyError(int rank, int required)
      : Error("design matrix is rank deficient: rank " + std::to_string(rank) + " of " +
              std::to_string(required)),
        rank_(rank),
        required_(required) {}

  int rank() const noexcept { return rank_; }
  int required() const noexcept { return required_; }

 private:
  int rank_;
  int required_;
};

/// Non-finite values in the solver input.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace dsse
