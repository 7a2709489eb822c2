#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace fockstab {

// Base of every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidDimension : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(int expected, int actual)
      : Error("dimension mismatch: expected " + std::to_string(expected) +
              ", got " + std::to_string(actual)) {}
};

// The sampled measurement branch carries (numerically) zero probability.
class DegenerateCollapse : public Error {
 public:
  using Error::Error;
};

// The filter assigned zero probability to an outcome that was observed.
class FilterDivergence : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error("config error in '" + field + "': " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Two photon numbers inside the filter truncation share a measurement
// statistic, so the outcomes cannot tell them apart.
class DegenerateMeasurement : public ConfigError {
 public:
  DegenerateMeasurement(int n1, int n2, double gap)
      : ConfigError("phi", "measurement eigenvalues cos^2(theta + n*phi) collide for n=" +
                               std::to_string(n1) + " and n=" + std::to_string(n2) +
                               " (gap " + std::to_string(gap) + ")"),
        first_(n1),
        second_(n2) {}

  int first() const noexcept { return first_; }
  int second() const noexcept { return second_; }

 private:
  int first_;
  int second_;
};

}  // namespace fockstab
