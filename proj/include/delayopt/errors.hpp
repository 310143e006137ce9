#pragma once

#include <stdexcept>
#include <string>

namespace delayopt {

// Base of everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "runtime"; }
};

// Bad configuration or bad arguments. The CLI maps this to exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config"; }
};

// The one-event-per-slot kernel needs sum_k (lambda_k + mu_k) * tau <= 1;
// raised when a policy breaks it.
class RegimeError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "regime"; }
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual, long iterations)
      : Error(what), residual_(residual), iterations_(iterations) {}
  const char* kind() const noexcept override { return "convergence"; }
  double residual() const noexcept { return residual_; }
  long iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  long iterations_;
};

class EnumerationTooLarge : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "enumeration"; }
};

class BracketError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "bracket"; }
};

}  // namespace delayopt
