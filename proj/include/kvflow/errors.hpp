#pragma once

#include <stdexcept>
#include <string>

namespace kvflow {

/// Invalid or inconsistent configuration (bad parameter, unknown key, size mismatch).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data that violates a documented precondition (e.g. non-tangential traction).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values or breakdown detected while integrating.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double time)
      : std::runtime_error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

}  // namespace kvflow
