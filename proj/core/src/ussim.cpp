#include "savfi/ussim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "savfi/parallel.hpp"

namespace savfi {
namespace {

// Tukey (tapered cosine) window, w[0] = w[n-1] = 0 for alpha > 0.
double tukey(int i, int n, double alpha) {
  if (n <= 1) {
    return 1.0;
  }
  const double x = static_cast<double>(i) / (n - 1);
  const double half = 0.5 * alpha;
  if (x < half) {
    return 0.5 * (1.0 + std::cos(std::numbers::pi * (x / half - 1.0)));
  }
  if (x > 1.0 - half) {
    return 0.5 *
           (1.0 + std::cos(std::numbers::pi * ((x - 1.0) / half + 1.0)));
  }
  return 1.0;
}

// Gaussian-envelope transduction impulse response with the configured -6 dB
// fractional bandwidth, truncated at 3.5 sigma.
std::vector<double> transduction_impulse(const ProbeConfig& probe) {
  const double bw_hz = probe.fractional_bandwidth * probe.f0_hz;
  const double sigma_f = bw_hz / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
  const double sigma_t = 1.0 / (2.0 * std::numbers::pi * sigma_f);
  const int half = static_cast<int>(std::ceil(3.5 * sigma_t * probe.fs_hz));
  std::vector<double> h(static_cast<std::size_t>(2 * half + 1));
  for (int i = -half; i <= half; ++i) {
    const double t = i / probe.fs_hz;
    h[static_cast<std::size_t>(i + half)] =
        std::exp(-0.5 * (t / sigma_t) * (t / sigma_t)) *
        std::cos(2.0 * std::numbers::pi * probe.f0_hz * t);
  }
  return h;
}

std::vector<double> convolve(const std::vector<double>& a,
                             const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      out[i + j] += a[i] * b[j];
    }
  }
  return out;
}

// Hann transmit weight for a scatterer, taken at the point where the ray
// from the virtual source through the scatterer crosses the array plane.
double tx_weight(const Vec2& scatterer, const Vec2& source,
                 double aperture_m) {
  const double dz = scatterer.z - source.z;
  if (dz <= 0.0) {
    return 0.0;
  }
  const double x_cross =
      source.x + (scatterer.x - source.x) * (-source.z / dz);
  const double u = x_cross / aperture_m + 0.5;  // 0..1 across the aperture
  if (u <= 0.0 || u >= 1.0) {
    return 0.0;
  }
  return 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * u);
}

}  // namespace

void ProbeConfig::validate() const {
  if (n_elements < 2) {
    throw ConfigError("probe needs at least 2 elements");
  }
  if (fs_hz < 4.0 * f0_hz) {
    throw ConfigError("sampling rate must be at least 4x the carrier");
  }
  if (n_virtual_sources < 1) {
    throw ConfigError("at least one virtual source required");
  }
  if (source_depth_m >= 0.0) {
    throw ConfigError("virtual sources must sit behind the array (z < 0)");
  }
  if (prf_hz <= 0.0 || f0_hz <= 0.0 || c_mps <= 0.0 ||
      element_pitch_m <= 0.0) {
    throw ConfigError("probe parameters must be positive");
  }
}

std::vector<Vec2> ProbeConfig::virtual_sources() const {
  std::vector<Vec2> sources;
  sources.reserve(static_cast<std::size_t>(n_virtual_sources));
  const double span = source_span_fraction * aperture_m();
  for (int s = 0; s < n_virtual_sources; ++s) {
    const double frac =
        n_virtual_sources == 1
            ? 0.5
            : static_cast<double>(s) / (n_virtual_sources - 1);
    sources.push_back({(frac - 0.5) * span, source_depth_m});
  }
  return sources;
}

std::vector<double> raw_excitation(const ProbeConfig& probe) {
  const int n = static_cast<int>(
      std::lround(probe.tx_cycles * probe.fs_hz / probe.f0_hz));
  std::vector<double> s(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double t = i / probe.fs_hz;
    s[static_cast<std::size_t>(i)] =
        tukey(i, n, probe.tukey_alpha) *
        std::sin(2.0 * std::numbers::pi * probe.f0_hz * t);
  }
  return s;
}

std::vector<double> excitation_pulse(const ProbeConfig& probe) {
  const std::vector<double> ir = transduction_impulse(probe);
  std::vector<double> pulse = convolve(raw_excitation(probe), ir);
  pulse = convolve(pulse, ir);  // transmit and receive transduction
  double peak = 0.0;
  for (double v : pulse) {
    peak = std::max(peak, std::abs(v));
  }
  if (peak > 0.0) {
    for (double& v : pulse) {
      v /= peak;
    }
  }
  return pulse;
}

int required_samples(const ProbeConfig& probe, const Rect& region) {
  const std::vector<Vec2> sources = probe.virtual_sources();
  const Vec2 corners[4] = {{region.x0, region.z0},
                           {region.x1, region.z0},
                           {region.x0, region.z1},
                           {region.x1, region.z1}};
  double tau_max = 0.0;
  for (const Vec2& src : sources) {
    const double center_dist = src.norm();
    for (const Vec2& p : corners) {
      for (int e : {0, probe.n_elements - 1}) {
        const Vec2 elem{probe.element_x(e), 0.0};
        const double tau =
            ((p - src).norm() - center_dist + (p - elem).norm()) /
            probe.c_mps;
        tau_max = std::max(tau_max, tau);
      }
    }
  }
  const auto pulse_len =
      static_cast<int>(excitation_pulse(probe).size());
  return static_cast<int>(std::ceil(tau_max * probe.fs_hz)) + pulse_len + 2;
}

void simulate_event(const ScattererCloud& cloud, const ProbeConfig& probe,
                    int source_index, int n_time, double t0, float* out,
                    int threads) {
  probe.validate();
  if (source_index < 0 || source_index >= probe.n_virtual_sources) {
    throw std::invalid_argument("source index out of range");
  }
  if (cloud.positions.empty()) {
    throw std::invalid_argument("scatterer cloud is empty");
  }
  for (const Vec2& p : cloud.positions) {
    if (p.z <= 0.0) {
      throw std::invalid_argument("scatterer behind the array (z <= 0)");
    }
  }
  const Vec2 source = probe.virtual_sources()[static_cast<std::size_t>(
      source_index)];
  const double center_dist = source.norm();
  const std::vector<double> pulse = excitation_pulse(probe);
  const int pulse_len = static_cast<int>(pulse.size());
  const double tan_cutoff = std::tan(probe.directivity_halfangle_rad);
  const std::size_t n_scatter = cloud.positions.size();

  // Precompute per-scatterer transmit geometry once; elements then run in
  // parallel, each writing its own RF line.
  std::vector<double> tx_w(n_scatter);
  std::vector<double> tx_delay(n_scatter);
  for (std::size_t s = 0; s < n_scatter; ++s) {
    const Vec2 p = cloud.positions[s];
    tx_w[s] = tx_weight(p, source, probe.aperture_m());
    tx_delay[s] = ((p - source).norm() - center_dist) / probe.c_mps;
  }

  parallel_for(0, probe.n_elements, threads, [&](int e) {
    float* line = out + static_cast<std::size_t>(e) * n_time;
    std::vector<double> acc(static_cast<std::size_t>(n_time), 0.0);
    const Vec2 elem{probe.element_x(e), 0.0};
    for (std::size_t s = 0; s < n_scatter; ++s) {
      const double w = tx_w[s] * cloud.amplitudes[s];
      if (w == 0.0) {
        continue;
      }
      const Vec2 p = cloud.positions[s];
      // hard directivity cutoff about the element normal
      if (std::abs(p.x - elem.x) > tan_cutoff * p.z) {
        continue;
      }
      const double tau =
          tx_delay[s] + (p - elem).norm() / probe.c_mps;
      // The two-way pulse is symmetric; referencing its center puts the
      // envelope peak exactly at the geometric delay.
      const double pos = (tau - t0) * probe.fs_hz - 0.5 * (pulse_len - 1);
      const auto base = static_cast<int>(std::floor(pos));
      const double frac = pos - base;
      // deposit the pulse with linear sub-sample interpolation
      const int lo = std::max(0, base);
      const int hi = std::min(n_time - 1, base + pulse_len);
      for (int i = lo; i <= hi; ++i) {
        const int k = i - base;
        const double p1 = k < pulse_len ? pulse[static_cast<std::size_t>(k)]
                                        : 0.0;
        const double p0 =
            (k >= 1 && k <= pulse_len)
                ? pulse[static_cast<std::size_t>(k - 1)]
                : 0.0;
        acc[static_cast<std::size_t>(i)] += w * (p1 + frac * (p0 - p1));
      }
    }
    for (int i = 0; i < n_time; ++i) {
      line[i] = static_cast<float>(acc[static_cast<std::size_t>(i)]);
    }
  });
}

ChannelData simulate_sequence(const FlowField& scene, ScattererCloud cloud,
                              const ProbeConfig& probe, int n_frames,
                              double t_start, const SimOptions& options) {
  probe.validate();
  if (n_frames < 1) {
    throw std::invalid_argument("n_frames must be >= 1");
  }
  ChannelData data;
  data.n_events = n_frames * probe.n_virtual_sources;
  data.n_elements = probe.n_elements;
  data.n_time = required_samples(probe, cloud.region);
  data.fs_hz = probe.fs_hz;
  data.t0_s = 0.0;
  data.prf_hz = probe.prf_hz;
  data.c_mps = probe.c_mps;
  data.f0_hz = probe.f0_hz;
  data.element_pitch_m = probe.element_pitch_m;
  data.sources = probe.virtual_sources();
  data.samples.resize(static_cast<std::size_t>(data.n_events) *
                      data.n_elements * data.n_time);

  const double event_dt = 1.0 / probe.prf_hz;
  for (int ev = 0; ev < data.n_events; ++ev) {
    const int source = ev % probe.n_virtual_sources;
    simulate_event(cloud, probe, source, data.n_time, data.t0_s,
                   data.event(ev), options.threads);
    if (ev + 1 < data.n_events) {
      cloud = advect(std::move(cloud), scene, t_start + ev * event_dt,
                     event_dt);
    }
  }

  if (options.noise_snr_db) {
    double sum_sq = 0.0;
    for (float v : data.samples) {
      sum_sq += static_cast<double>(v) * v;
    }
    const double rms =
        std::sqrt(sum_sq / static_cast<double>(data.samples.size()));
    const double sigma =
        rms * std::pow(10.0, -*options.noise_snr_db / 20.0);
    Rng noise_rng(options.noise_seed);
    for (float& v : data.samples) {
      v += static_cast<float>(sigma * noise_rng.normal());
    }
  }
  return data;
}

}  // namespace savfi
