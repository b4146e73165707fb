#include "savfi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace savfi {

double epe_percent(const float* truth, const float* estimate, int height,
                   int width, const float* mask) {
  const std::size_t plane =
      static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  double err_sum = 0.0;
  double count = 0.0;
  double v_max = 0.0;
  for (std::size_t i = 0; i < plane; ++i) {
    if (mask != nullptr && mask[i] == 0.0f) {
      continue;
    }
    const double tz = truth[i];
    const double tx = truth[plane + i];
    const double ez = estimate[i];
    const double ex = estimate[plane + i];
    err_sum += std::sqrt((tz - ez) * (tz - ez) + (tx - ex) * (tx - ex));
    v_max = std::max(v_max, std::sqrt(tz * tz + tx * tx));
    count += 1.0;
  }
  if (count == 0.0) {
    throw std::invalid_argument("EPE mask excludes every pixel");
  }
  if (v_max == 0.0) {
    throw std::invalid_argument(
        "EPE undefined: ground truth has zero maximum velocity");
  }
  return 100.0 * (err_sum / count) / v_max;
}

namespace {

// inclusive linear-interpolation quantile on sorted data
double quantile_sorted(const std::vector<double>& sorted, double q) {
  const std::size_t n = sorted.size();
  if (n == 1) {
    return sorted[0];
  }
  const double pos = q * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(n - 1, lo + 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

EpeReport summarize(std::vector<double> epe_values) {
  if (epe_values.empty()) {
    throw std::invalid_argument("cannot summarize an empty EPE list");
  }
  EpeReport report;
  report.samples = epe_values;
  std::vector<double> sorted = std::move(epe_values);
  std::sort(sorted.begin(), sorted.end());

  report.q1 = quantile_sorted(sorted, 0.25);
  report.median = quantile_sorted(sorted, 0.50);
  report.q3 = quantile_sorted(sorted, 0.75);
  const double iqr = report.q3 - report.q1;
  const double lo_fence = report.q1 - 1.5 * iqr;
  const double hi_fence = report.q3 + 1.5 * iqr;

  // whiskers: most extreme data inside the fences (the fences always
  // bracket the interquartile range, so both exist)
  report.lo_whisker = sorted.back();
  report.hi_whisker = sorted.front();
  report.outliers = 0;
  for (double v : sorted) {
    if (v < lo_fence || v > hi_fence) {
      ++report.outliers;
    } else {
      report.lo_whisker = std::min(report.lo_whisker, v);
      report.hi_whisker = std::max(report.hi_whisker, v);
    }
  }
  return report;
}

}  // namespace savfi
