#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "savfi/common.hpp"

namespace savfi {

// Iterative cross-correlation velocimetry over speckle envelope images.
struct PivConfig {
  int initial_window = 32;  // halved each iteration
  int iterations = 3;
  double overlap = 0.5;
  double validation_threshold = 2.0;  // normalized median test

  void validate() const;
};

// Circular normalized cross-covariance of two mean-subtracted windows.
// values is n x n, lag (dz, dx) at index ((dz mod n), (dx mod n)).
struct CorrelationSurface {
  std::vector<double> values;
  int n = 0;
  bool valid = true;  // false for zero-variance windows

  double at(int row, int col) const {
    return values[static_cast<std::size_t>(row) * n + col];
  }
};

CorrelationSurface correlate_windows(const float* a, const float* b, int n);

struct PeakEstimate {
  double dz = 0.0;  // axial lag, px
  double dx = 0.0;  // lateral lag, px
  bool border = false;  // integer fallback: peak on the surface border
};

// Integer argmax plus per-axis 3-point Gaussian refinement (parabolic when a
// neighbor is non-positive). Lags are interpreted as signed in [-n/2, n/2).
PeakEstimate subpixel_peak(const CorrelationSurface& surface);

struct VelocityEstimate {
  std::vector<float> v;             // [2][H][W]: axial then lateral, m/s
  std::vector<std::uint8_t> valid;  // [H][W]
  int height = 0;
  int width = 0;
  std::string source;  // "piv" | "cnn"
  double pitch_m = 0.0;
  double frame_dt_s = 0.0;

  float& axial(int r, int c) {
    return v[static_cast<std::size_t>(r) * width + c];
  }
  float& lateral(int r, int c) {
    return v[static_cast<std::size_t>(height) * width +
             static_cast<std::size_t>(r) * width + c];
  }
  float axial(int r, int c) const {
    return v[static_cast<std::size_t>(r) * width + c];
  }
  float lateral(int r, int c) const {
    return v[static_cast<std::size_t>(height) * width +
             static_cast<std::size_t>(r) * width + c];
  }
};

// Multi-pass PIV: window size halves per iteration, 50% overlap tiling,
// predictor-offset correlation, normalized-median validation with local
// median replacement, bilinear refinement between levels, final bilinear
// upsampling to pixel resolution. velocity = displacement * pitch / dt.
VelocityEstimate piv_pyramid(const float* frame_a, const float* frame_b,
                             int height, int width, const PivConfig& config,
                             double pitch_m, double frame_dt_s);

}  // namespace savfi
