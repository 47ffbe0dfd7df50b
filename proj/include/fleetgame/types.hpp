#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace fleetgame {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid input: bad dimensions, out-of-range parameters, malformed files.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, std::string message)
      : Error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A numerical routine failed to reach its tolerance within its iteration cap.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// The two rival companies.
enum class Company { a = 0, b = 1 };

inline const char* to_string(Company c) { return c == Company::a ? "a" : "b"; }

inline void require(bool condition, const std::string& field, const std::string& message) {
  if (!condition) throw ValidationError(field, message);
}

}  // namespace fleetgame
