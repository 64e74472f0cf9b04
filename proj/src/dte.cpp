#include "cad/dte.hpp"

#include <algorithm>
#include <cmath>

#include "cad/error.hpp"

namespace cad {

void ThresholdSchedule::validate() const {
  if (!(c_min >= 0.0 && c_max <= 1.0 && c_min <= c_max)) {
    throw Error(ErrorCode::InvalidConfig, "need 0 <= c_min <= c_max <= 1");
  }
  if (r_min < 1 || r_min > r_max) throw Error(ErrorCode::InvalidConfig, "need 1 <= r_min <= r_max");
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw Error(ErrorCode::InvalidConfig, "beta must be a positive finite number");
  }
}

double ramp(const ThresholdSchedule& sched, double t) {
  if (!(t >= 0.0)) throw Error(ErrorCode::InvalidIteration, "iteration must be non-negative");
  if (!(sched.beta > 0.0)) throw Error(ErrorCode::InvalidConfig, "beta must be positive");
  return -std::expm1(-t / sched.beta);
}

Thresholds thresholds_at(const ThresholdSchedule& sched, double t) {
  const double psi = ramp(sched, t);
  Thresholds out;
  out.c_threshold = sched.c_min + (sched.c_max - sched.c_min) * psi;
  const double r = sched.r_min + (sched.r_max - sched.r_min) * psi;
  out.r_threshold = std::clamp(static_cast<int>(std::floor(r + 0.5)), sched.r_min, sched.r_max);
  return out;
}

double default_beta(long total_iterations) {
  return std::max(1.0, static_cast<double>(total_iterations) / 5.0);
}

}  // namespace cad
