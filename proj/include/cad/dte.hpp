#pragma once

namespace cad {

/// Exponential escalation of the confidence threshold and the region-size cap.
struct ThresholdSchedule {
  double c_min = 0.01;
  double c_max = 0.75;
  int r_min = 1;
  int r_max = 16;
  double beta = 1000.0;  ///< ramp time constant, in iterations

  /// Throws InvalidConfig when bounds are inverted or beta is not positive.
  void validate() const;
};

struct Thresholds {
  double c_threshold = 0.0;
  int r_threshold = 0;
};

/// 1 − exp(−t / beta); throws InvalidIteration for negative t.
double ramp(const ThresholdSchedule& sched, double t);

/// Thresholds at iteration t. The size cap is rounded half-up and clamped
/// to [r_min, r_max].
Thresholds thresholds_at(const ThresholdSchedule& sched, double t);

/// beta used when none is configured: a fifth of the run length.
double default_beta(long total_iterations);

}  // namespace cad
