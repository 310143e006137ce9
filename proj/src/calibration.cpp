#include "delayopt/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "delayopt/errors.hpp"

namespace delayopt {

CalibrationResult calibrate_gamma(const std::function<double(double)>& avg_power, double target,
                                  const CalibrationOptions& options) {
  if (!(target > 0.0)) throw ConfigError("calibration target power must be > 0");
  if (!(options.gamma_min > 0.0) || !(options.gamma_max > options.gamma_min))
    throw ConfigError("calibration needs 0 < gamma_min < gamma_max");

  CalibrationResult result;
  double best_err = INFINITY;
  auto evaluate = [&](double gamma) {
    if (result.iterations >= options.max_iters) {
      std::ostringstream os;
      os << "gamma calibration did not reach " << options.tolerance * 100 << "% of P_0 in "
         << options.max_iters << " evaluations (best relative error " << best_err << ")";
      throw ConvergenceError(os.str(), best_err, result.iterations);
    }
    ++result.iterations;
    const double p = avg_power(gamma);
    result.history.emplace_back(gamma, p);
    const double err = std::fabs(p - target) / target;
    if (err < best_err) {
      best_err = err;
      result.gamma = gamma;
      result.avg_power = p;
    }
    return p;
  };
  auto done = [&](double p) { return std::fabs(p - target) / target <= options.tolerance; };

  double g = std::clamp(options.initial_gamma, options.gamma_min, options.gamma_max);
  double p = evaluate(g);
  if (done(p)) return result;

  // Bracket: lo spends at least the budget, hi at most.
  double lo = g, hi = g;
  if (p > target) {
    while (p > target) {
      lo = hi;
      if (hi >= options.gamma_max) {
        std::ostringstream os;
        os << "average power " << p << " still above target " << target << " at gamma_max " << hi;
        throw BracketError(os.str());
      }
      hi = std::min(hi * 10.0, options.gamma_max);
      p = evaluate(hi);
      if (done(p)) return result;
    }
  } else {
    while (p < target) {
      hi = lo;
      if (lo <= options.gamma_min) {
        std::ostringstream os;
        os << "budget unreachable: average power " << p << " < target " << target << " at gamma_min " << lo;
        throw BracketError(os.str());
      }
      lo = std::max(lo / 10.0, options.gamma_min);
      p = evaluate(lo);
      if (done(p)) return result;
    }
  }

  for (;;) {
    const double mid = std::sqrt(lo * hi);
    p = evaluate(mid);
    if (done(p)) return result;
    if (p > target)
      lo = mid;
    else
      hi = mid;
  }
}

}  // namespace delayopt
