#pragma once

#include <stdexcept>
#include <string>

namespace survflow {

/// Base class for all survflow errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A state, derivative or loss value became NaN/Inf.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// An adaptive or fixed integration exceeded its step budget.
class StepLimitError : public Error {
 public:
  using Error::Error;
};

/// Vector/matrix dimensions do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of the operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Survival mass too small to divide by.
class DegenerateSurvivalError : public Error {
 public:
  using Error::Error;
};

/// Operation requires a different hierarchy mode.
class ModeError : public Error {
 public:
  using Error::Error;
};

/// Training loss became non-finite.
class DivergedError : public Error {
 public:
  DivergedError(const std::string& what, int epoch) : Error(what), epoch(epoch) {}
  int epoch;
};

/// Generator specification produced an invalid parameter.
class InvalidSpecError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, long row = -1, long column = -1)
      : Error(what), row(row), column(column) {}
  long row;
  long column;
};

/// Required column absent from a dataset file.
class MissingColumnError : public Error {
 public:
  using Error::Error;
};

/// Observation time must be strictly positive.
class NonPositiveTimeError : public Error {
 public:
  using Error::Error;
};

/// No solution satisfies the constraints.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Iterative solver hit its cap while still improving.
class NotConvergedError : public Error {
 public:
  using Error::Error;
};

/// A class or dataset lacks the events needed for estimation.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Configuration file violates the schema.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace survflow
