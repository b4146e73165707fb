#pragma once

#include <optional>
#include <vector>

#include "savfi/common.hpp"
#include "savfi/flowfield.hpp"
#include "savfi/phantom.hpp"
#include "savfi/rng.hpp"

namespace savfi {

// Synthetic-aperture acquisition model: a linear array insonified by
// diverging waves from virtual point sources behind the array.
struct ProbeConfig {
  int n_elements = 128;
  double element_pitch_m = 0.2e-3;
  double f0_hz = 8e6;
  double fractional_bandwidth = 0.60;  // at -6 dB, per transduction stage
  double c_mps = 1540.0;
  double fs_hz = 40e6;
  double prf_hz = 5000.0;
  int n_virtual_sources = 5;
  double source_depth_m = -10e-3;      // z of the virtual sources (< 0)
  double source_span_fraction = 0.8;   // sources spread over this aperture fraction
  double tx_cycles = 3.0;
  double tukey_alpha = 0.5;
  double directivity_halfangle_rad = 0.78539816339744830961;  // 45 deg

  void validate() const;
  double aperture_m() const { return n_elements * element_pitch_m; }
  // element x-coordinates, symmetric about 0
  double element_x(int e) const {
    return (e - 0.5 * (n_elements - 1)) * element_pitch_m;
  }
  std::vector<Vec2> virtual_sources() const;
};

// Two-way excitation: Tukey-tapered 3-cycle tone convolved twice with a
// Gaussian-envelope transduction impulse response, unit peak.
std::vector<double> excitation_pulse(const ProbeConfig& probe);

// Tukey-tapered tone only (before transduction); exposed for tests.
std::vector<double> raw_excitation(const ProbeConfig& probe);

struct ChannelData {
  // [n_events][n_elements][n_time]
  std::vector<float> samples;
  int n_events = 0;
  int n_elements = 0;
  int n_time = 0;
  double fs_hz = 0.0;
  double t0_s = 0.0;  // time of sample 0 relative to the diverging wavefront
                      // passing the array center
  double prf_hz = 0.0;
  double c_mps = 0.0;
  double f0_hz = 0.0;
  double element_pitch_m = 0.0;
  std::vector<Vec2> sources;  // per virtual source; event e uses e % sources

  const float* event(int e) const {
    return samples.data() +
           static_cast<std::size_t>(e) * n_elements * n_time;
  }
  float* event(int e) {
    return samples.data() +
           static_cast<std::size_t>(e) * n_elements * n_time;
  }
};

// Samples needed to cover echoes from everywhere inside `region` for every
// source/element combination, pulse tail included.
int required_samples(const ProbeConfig& probe, const Rect& region);

// Single-transmit RF for one virtual source; out must hold
// n_elements * n_time floats and is overwritten.
void simulate_event(const ScattererCloud& cloud, const ProbeConfig& probe,
                    int source_index, int n_time, double t0, float* out,
                    int threads = 1);

struct SimOptions {
  int threads = 1;
  std::optional<double> noise_snr_db;  // additive white noise, off by default
  std::uint64_t noise_seed = 0;
};

// Full sequence: sources 0..S-1 repeating, cloud advected by 1/prf between
// events; n_frames compounded frames take S * n_frames events.
ChannelData simulate_sequence(const FlowField& scene, ScattererCloud cloud,
                              const ProbeConfig& probe, int n_frames,
                              double t_start = 0.0,
                              const SimOptions& options = {});

}  // namespace savfi
