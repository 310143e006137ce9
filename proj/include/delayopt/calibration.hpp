#pragma once

#include <functional>
#include <utility>
#include <vector>

namespace delayopt {

struct CalibrationOptions {
  double initial_gamma = 1.0;
  double gamma_min = 1e-9;
  double gamma_max = 1e3;
  double tolerance = 0.02;  // relative error on the achieved average power
  int max_iters = 30;
};

struct CalibrationResult {
  double gamma = 0.0;
  double avg_power = 0.0;
  int iterations = 0;
  std::vector<std::pair<double, double>> history;  // (gamma, measured power)
};

/// Finds gamma with |avg_power(gamma) - target| / target <= tolerance by
/// bracketing in decades from `initial_gamma` and bisecting geometrically.
/// `avg_power` must be nonincreasing in gamma (e.g. measured with common
/// random numbers). Throws BracketError when even gamma_min cannot spend the
/// budget, ConvergenceError when max_iters runs out.
CalibrationResult calibrate_gamma(const std::function<double(double)>& avg_power, double target,
                                  const CalibrationOptions& options);

}  // namespace delayopt
