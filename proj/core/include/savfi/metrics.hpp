#pragma once

#include <vector>

#include "savfi/common.hpp"

namespace savfi {

// Percentage endpoint error:
//   100 * E[ sqrt((vz - vz')^2 + (vx - vx')^2) ] / V_max
// where E[.] averages over the (masked) pixels and V_max is the maximum
// velocity magnitude of the (masked) ground-truth field. truth and estimate
// are [2][H][W] (axial, lateral); mask, when given, is [H][W] with zero
// meaning excluded. Throws when V_max == 0 or the mask excludes everything.
double epe_percent(const float* truth, const float* estimate, int height,
                   int width, const float* mask);

// Dataset-level summary matching Tukey boxplot reporting: median and
// quartiles via inclusive linear interpolation, whiskers at 1.5 IQR clipped
// to the data range.
struct EpeReport {
  std::vector<double> samples;  // as given
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double lo_whisker = 0.0;
  double hi_whisker = 0.0;
  int outliers = 0;
  bool masked = false;
};

EpeReport summarize(std::vector<double> epe_values);

}  // namespace savfi
