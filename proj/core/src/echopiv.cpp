#include "savfi/echopiv.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "savfi/fft.hpp"

namespace savfi {
namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) {
    return 0.0;
  }
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int signed_lag(int index, int n) { return index < n / 2 ? index : index - n; }

// Tile start positions with the requested overlap; the last tile is clamped
// so the frame edge is always covered.
std::vector<int> tile_starts(int extent, int window, double overlap) {
  const int stride =
      std::max(1, static_cast<int>(std::lround(window * (1.0 - overlap))));
  std::vector<int> starts;
  for (int s = 0; s + window <= extent; s += stride) {
    starts.push_back(s);
  }
  if (starts.empty() || starts.back() != extent - window) {
    starts.push_back(extent - window);
  }
  return starts;
}

// Piecewise-linear interpolation of a tile-grid field at (y, x), clamped at
// the grid hull.
double sample_grid(const std::vector<double>& field,
                   const std::vector<double>& ys,
                   const std::vector<double>& xs, double y, double x) {
  const auto locate = [](const std::vector<double>& c, double v, int& lo,
                         double& frac) {
    const int n = static_cast<int>(c.size());
    if (n == 1 || v <= c.front()) {
      lo = 0;
      frac = 0.0;
      return;
    }
    if (v >= c.back()) {
      lo = n - 2;
      frac = 1.0;
      return;
    }
    lo = static_cast<int>(std::upper_bound(c.begin(), c.end(), v) -
                          c.begin()) -
         1;
    lo = std::min(lo, n - 2);
    frac = (v - c[static_cast<std::size_t>(lo)]) /
           (c[static_cast<std::size_t>(lo + 1)] -
            c[static_cast<std::size_t>(lo)]);
  };
  int iy = 0;
  int ix = 0;
  double fy = 0.0;
  double fx = 0.0;
  locate(ys, y, iy, fy);
  locate(xs, x, ix, fx);
  const int nx = static_cast<int>(xs.size());
  const auto at = [&](int r, int c) {
    return field[static_cast<std::size_t>(r) * nx + c];
  };
  if (ys.size() == 1 && xs.size() == 1) {
    return at(0, 0);
  }
  if (ys.size() == 1) {
    return (1 - fx) * at(0, ix) + fx * at(0, ix + 1);
  }
  if (xs.size() == 1) {
    return (1 - fy) * at(iy, 0) + fy * at(iy + 1, 0);
  }
  return (1 - fy) * ((1 - fx) * at(iy, ix) + fx * at(iy, ix + 1)) +
         fy * ((1 - fx) * at(iy + 1, ix) + fx * at(iy + 1, ix + 1));
}

}  // namespace

void PivConfig::validate() const {
  if (iterations < 1) {
    throw std::invalid_argument("piv iterations must be >= 1");
  }
  if (overlap < 0.0 || overlap > 0.9) {
    throw std::invalid_argument("piv overlap must be in [0, 0.9]");
  }
  int w = initial_window;
  for (int i = 0; i < iterations; ++i) {
    if (w < 4 || w % 2 != 0) {
      throw std::invalid_argument(
          "piv window sizes must stay even and >= 4 over all iterations");
    }
    if (i + 1 < iterations) {
      w /= 2;
    }
  }
}

CorrelationSurface correlate_windows(const float* a, const float* b, int n) {
  if (n < 2 || n % 2 != 0) {
    throw std::invalid_argument("correlation windows must be even-sized");
  }
  const std::size_t n_pix = static_cast<std::size_t>(n) * n;
  std::vector<std::complex<double>> fa(n_pix);
  std::vector<std::complex<double>> fb(n_pix);
  double mean_a = 0.0;
  double mean_b = 0.0;
  for (std::size_t i = 0; i < n_pix; ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a /= static_cast<double>(n_pix);
  mean_b /= static_cast<double>(n_pix);
  double var_a = 0.0;
  double var_b = 0.0;
  for (std::size_t i = 0; i < n_pix; ++i) {
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    var_a += da * da;
    var_b += db * db;
    fa[i] = {da, 0.0};
    fb[i] = {db, 0.0};
  }

  CorrelationSurface surface;
  surface.n = n;
  surface.values.assign(n_pix, 0.0);
  const double floor_a = 1e-20 * static_cast<double>(n_pix) *
                         (mean_a * mean_a + 1e-30);
  const double floor_b = 1e-20 * static_cast<double>(n_pix) *
                         (mean_b * mean_b + 1e-30);
  if (var_a <= floor_a || var_b <= floor_b) {
    surface.valid = false;
    return surface;
  }

  fft::c2c_2d(fa.data(), n, n, false);
  fft::c2c_2d(fb.data(), n, n, false);
  for (std::size_t i = 0; i < n_pix; ++i) {
    fa[i] = std::conj(fa[i]) * fb[i];
  }
  fft::c2c_2d(fa.data(), n, n, true);
  const double norm = std::sqrt(var_a * var_b);
  for (std::size_t i = 0; i < n_pix; ++i) {
    surface.values[i] = fa[i].real() / norm;
  }
  return surface;
}

PeakEstimate subpixel_peak(const CorrelationSurface& surface) {
  const int n = surface.n;
  int peak_r = 0;
  int peak_c = 0;
  double peak = surface.values[0];
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const double v = surface.at(r, c);
      if (v > peak) {
        peak = v;
        peak_r = r;
        peak_c = c;
      }
    }
  }
  PeakEstimate est;
  est.dz = signed_lag(peak_r, n);
  est.dx = signed_lag(peak_c, n);
  // The lag spectrum is circular; the wrap boundary (lag -n/2 and the most
  // positive lag) is where sub-sample refinement becomes ambiguous.
  if (peak_r == n / 2 || peak_c == n / 2 ||
      (peak_r + 1) % n == n / 2 || (peak_c + 1) % n == n / 2) {
    est.border = true;
    return est;
  }

  const auto refine = [&](double cm, double c0, double cp) {
    if (cm > 0.0 && c0 > 0.0 && cp > 0.0) {
      const double lm = std::log(cm);
      const double l0 = std::log(c0);
      const double lp = std::log(cp);
      const double denom = 2.0 * lm - 4.0 * l0 + 2.0 * lp;
      if (std::abs(denom) > 1e-300) {
        return std::clamp((lm - lp) / denom, -1.0, 1.0);
      }
      return 0.0;
    }
    const double denom = 2.0 * cm - 4.0 * c0 + 2.0 * cp;
    if (std::abs(denom) > 1e-300) {
      return std::clamp((cm - cp) / denom, -1.0, 1.0);
    }
    return 0.0;
  };

  const int rm = (peak_r + n - 1) % n;
  const int rp = (peak_r + 1) % n;
  const int cm = (peak_c + n - 1) % n;
  const int cp = (peak_c + 1) % n;
  est.dz += refine(surface.at(rm, peak_c), peak, surface.at(rp, peak_c));
  est.dx += refine(surface.at(peak_r, cm), peak, surface.at(peak_r, cp));
  return est;
}

VelocityEstimate piv_pyramid(const float* frame_a, const float* frame_b,
                             int height, int width, const PivConfig& config,
                             double pitch_m, double frame_dt_s) {
  config.validate();
  if (height < config.initial_window || width < config.initial_window) {
    throw std::invalid_argument("frames smaller than interrogation window");
  }
  if (frame_dt_s <= 0.0 || pitch_m <= 0.0) {
    throw std::invalid_argument("pitch and frame interval must be > 0");
  }

  std::vector<double> prev_dz;
  std::vector<double> prev_dx;
  std::vector<double> prev_ys;
  std::vector<double> prev_xs;
  std::vector<std::uint8_t> tile_valid;

  int window = config.initial_window;
  std::vector<float> win_a;
  std::vector<float> win_b;
  for (int level = 0; level < config.iterations; ++level) {
    const std::vector<int> ys = tile_starts(height, window, config.overlap);
    const std::vector<int> xs = tile_starts(width, window, config.overlap);
    const int ny = static_cast<int>(ys.size());
    const int nx = static_cast<int>(xs.size());
    std::vector<double> cur_dz(static_cast<std::size_t>(ny) * nx, 0.0);
    std::vector<double> cur_dx(static_cast<std::size_t>(ny) * nx, 0.0);
    std::vector<std::uint8_t> cur_valid(static_cast<std::size_t>(ny) * nx, 1);
    std::vector<double> cys(static_cast<std::size_t>(ny));
    std::vector<double> cxs(static_cast<std::size_t>(nx));
    for (int i = 0; i < ny; ++i) {
      cys[static_cast<std::size_t>(i)] = ys[static_cast<std::size_t>(i)] +
                                         0.5 * (window - 1);
    }
    for (int j = 0; j < nx; ++j) {
      cxs[static_cast<std::size_t>(j)] = xs[static_cast<std::size_t>(j)] +
                                         0.5 * (window - 1);
    }

    win_a.resize(static_cast<std::size_t>(window) * window);
    win_b.resize(static_cast<std::size_t>(window) * window);
    std::vector<double> pred_z(static_cast<std::size_t>(ny) * nx, 0.0);
    std::vector<double> pred_x(static_cast<std::size_t>(ny) * nx, 0.0);

    for (int i = 0; i < ny; ++i) {
      for (int j = 0; j < nx; ++j) {
        const std::size_t t = static_cast<std::size_t>(i) * nx + j;
        if (level > 0) {
          pred_z[t] = sample_grid(prev_dz, prev_ys, prev_xs, cys[i], cxs[j]);
          pred_x[t] = sample_grid(prev_dx, prev_ys, prev_xs, cys[i], cxs[j]);
        }
        const int want_y = ys[static_cast<std::size_t>(i)] +
                           static_cast<int>(std::lround(pred_z[t]));
        const int want_x = xs[static_cast<std::size_t>(j)] +
                           static_cast<int>(std::lround(pred_x[t]));
        const int by = std::clamp(want_y, 0, height - window);
        const int bx = std::clamp(want_x, 0, width - window);
        const double off_z = by - ys[static_cast<std::size_t>(i)];
        const double off_x = bx - xs[static_cast<std::size_t>(j)];
        for (int r = 0; r < window; ++r) {
          const float* src_a =
              frame_a +
              static_cast<std::size_t>(ys[static_cast<std::size_t>(i)] + r) *
                  width +
              xs[static_cast<std::size_t>(j)];
          const float* src_b =
              frame_b + static_cast<std::size_t>(by + r) * width + bx;
          std::copy(src_a, src_a + window,
                    win_a.begin() + static_cast<std::size_t>(r) * window);
          std::copy(src_b, src_b + window,
                    win_b.begin() + static_cast<std::size_t>(r) * window);
        }
        const CorrelationSurface surface =
            correlate_windows(win_a.data(), win_b.data(), window);
        if (!surface.valid) {
          cur_valid[t] = 0;
          cur_dz[t] = pred_z[t];
          cur_dx[t] = pred_x[t];
          continue;
        }
        const PeakEstimate peak = subpixel_peak(surface);
        cur_dz[t] = off_z + peak.dz;
        cur_dx[t] = off_x + peak.dx;
      }
    }

    // normalized median test (vector residual form)
    std::vector<std::uint8_t> outlier(static_cast<std::size_t>(ny) * nx, 0);
    for (int i = 0; i < ny; ++i) {
      for (int j = 0; j < nx; ++j) {
        const std::size_t t = static_cast<std::size_t>(i) * nx + j;
        std::vector<double> nz;
        std::vector<double> nxs;
        for (int di = -1; di <= 1; ++di) {
          for (int dj = -1; dj <= 1; ++dj) {
            if (di == 0 && dj == 0) {
              continue;
            }
            const int ii = i + di;
            const int jj = j + dj;
            if (ii < 0 || jj < 0 || ii >= ny || jj >= nx) {
              continue;
            }
            nz.push_back(cur_dz[static_cast<std::size_t>(ii) * nx + jj]);
            nxs.push_back(cur_dx[static_cast<std::size_t>(ii) * nx + jj]);
          }
        }
        if (nz.size() < 3) {
          continue;
        }
        const double med_z = median_of(nz);
        const double med_x = median_of(nxs);
        std::vector<double> residuals;
        residuals.reserve(nz.size());
        for (std::size_t k = 0; k < nz.size(); ++k) {
          residuals.push_back(std::hypot(nz[k] - med_z, nxs[k] - med_x));
        }
        const double med_res = median_of(residuals);
        const double fluct = std::hypot(cur_dz[t] - med_z, cur_dx[t] - med_x) /
                             (med_res + 0.1);
        if (fluct > config.validation_threshold) {
          outlier[t] = 1;
        }
      }
    }
    for (std::size_t t = 0; t < outlier.size(); ++t) {
      if (outlier[t] != 0) {
        cur_valid[t] = 0;
      }
    }

    // replace invalid vectors by the local median of valid neighbours
    std::vector<double> rep_dz = cur_dz;
    std::vector<double> rep_dx = cur_dx;
    for (int i = 0; i < ny; ++i) {
      for (int j = 0; j < nx; ++j) {
        const std::size_t t = static_cast<std::size_t>(i) * nx + j;
        if (cur_valid[t] != 0) {
          continue;
        }
        bool replaced = false;
        for (int radius = 1; radius <= 2 && !replaced; ++radius) {
          std::vector<double> nz;
          std::vector<double> nxs;
          for (int di = -radius; di <= radius; ++di) {
            for (int dj = -radius; dj <= radius; ++dj) {
              if (di == 0 && dj == 0) {
                continue;
              }
              const int ii = i + di;
              const int jj = j + dj;
              if (ii < 0 || jj < 0 || ii >= ny || jj >= nx) {
                continue;
              }
              const std::size_t u = static_cast<std::size_t>(ii) * nx + jj;
              if (cur_valid[u] != 0) {
                nz.push_back(cur_dz[u]);
                nxs.push_back(cur_dx[u]);
              }
            }
          }
          if (!nz.empty()) {
            rep_dz[t] = median_of(nz);
            rep_dx[t] = median_of(nxs);
            replaced = true;
          }
        }
        if (!replaced) {
          rep_dz[t] = pred_z[t];
          rep_dx[t] = pred_x[t];
        }
      }
    }

    prev_dz = std::move(rep_dz);
    prev_dx = std::move(rep_dx);
    prev_ys = std::move(cys);
    prev_xs = std::move(cxs);
    tile_valid = std::move(cur_valid);
    if (level + 1 < config.iterations) {
      window /= 2;
    }
  }

  VelocityEstimate out;
  out.height = height;
  out.width = width;
  out.source = "piv";
  out.pitch_m = pitch_m;
  out.frame_dt_s = frame_dt_s;
  out.v.resize(2 * static_cast<std::size_t>(height) * width);
  out.valid.resize(static_cast<std::size_t>(height) * width);
  const double scale = pitch_m / frame_dt_s;
  const int nx = static_cast<int>(prev_xs.size());
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const double dz = sample_grid(prev_dz, prev_ys, prev_xs, r, c);
      const double dx = sample_grid(prev_dx, prev_ys, prev_xs, r, c);
      out.axial(r, c) = static_cast<float>(dz * scale);
      out.lateral(r, c) = static_cast<float>(dx * scale);
      // nearest tile's measurement validity
      int bi = 0;
      int bj = 0;
      double best = 1e300;
      for (std::size_t i = 0; i < prev_ys.size(); ++i) {
        const double d = std::abs(prev_ys[i] - r);
        if (d < best) {
          best = d;
          bi = static_cast<int>(i);
        }
      }
      best = 1e300;
      for (std::size_t j = 0; j < prev_xs.size(); ++j) {
        const double d = std::abs(prev_xs[j] - c);
        if (d < best) {
          best = d;
          bj = static_cast<int>(j);
        }
      }
      out.valid[static_cast<std::size_t>(r) * width + c] =
          tile_valid[static_cast<std::size_t>(bi) * nx + bj];
    }
  }
  return out;
}

}  // namespace savfi
