#pragma once

#include <stdexcept>
#include <string>

namespace skf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration or argument problems (CLI maps these to exit code 1).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Everything below is a numerical failure (CLI exit code 2).
class NumericalError : public Error {
 public:
  using Error::Error;
};

class SingularGram : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class RankDeficient : public NumericalError {
 public:
  RankDeficient(const std::string& what, long rank, long columns)
      : NumericalError(what), rank_(rank), columns_(columns) {}
  long rank() const { return rank_; }
  long columns() const { return columns_; }
  long deficiency() const { return columns_ - rank_; }

 private:
  long rank_;
  long columns_;
};

class UnderdeterminedSystem : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegreeOverflow : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DivergedClosure : public NumericalError {
 public:
  DivergedClosure(const std::string& what, double time)
      : NumericalError(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

}  // namespace skf
