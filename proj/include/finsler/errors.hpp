#pragma once

#include <stdexcept>
#include <string>

namespace finsler {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Tangent vector lies outside the conic domain A of the metric.
class DomainError : public Error {
public:
  explicit DomainError(const std::string& what) : Error(what) {}
};

/// Fundamental tensor degenerate (reciprocal condition below threshold).
class NondegeneracyError : public Error {
public:
  explicit NondegeneracyError(const std::string& what) : Error(what) {}
};

/// g fails to be positive definite where the index machinery requires it.
class SignatureError : public Error {
public:
  explicit SignatureError(const std::string& what) : Error(what) {}
};

/// Restriction of g to a submanifold tangent space is degenerate.
class SplittingError : public Error {
public:
  explicit SplittingError(const std::string& what) : Error(what) {}
};

/// ODE integration failed (step-size collapse, step budget exhausted).
class IntegrationError : public Error {
public:
  explicit IntegrationError(const std::string& what) : Error(what) {}
};

/// Trajectory left the conic domain; carries the exit time.
class DomainExitError : public DomainError {
public:
  DomainExitError(const std::string& what, double exit_time)
      : DomainError(what), exit_time(exit_time) {}
  double exit_time;
};

/// Expression source failed to parse; carries the offending position.
class ParseError : public Error {
public:
  ParseError(const std::string& what, std::size_t position)
      : Error(what), position(position) {}
  std::size_t position;
};

/// Newton/shooting style iteration did not converge.
class ConvergenceError : public Error {
public:
  explicit ConvergenceError(const std::string& what) : Error(what) {}
};

/// A theorem hypothesis checked at runtime does not hold.
class HypothesisError : public Error {
public:
  explicit HypothesisError(const std::string& what) : Error(what) {}
};

/// Disconjugate partition invalid or not refinable within the node cap.
class PartitionError : public Error {
public:
  explicit PartitionError(const std::string& what) : Error(what) {}
};

/// Operation called with inputs violating its preconditions.
class PreconditionError : public Error {
public:
  explicit PreconditionError(const std::string& what) : Error(what) {}
};

}  // namespace finsler
