#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <vector>

#include "savfi/common.hpp"
#include "savfi/rng.hpp"

namespace savfi {

// Multiplicative pulsatility waveform, raised cosine in [0.25, 1.5].
struct PulseWaveform {
  double period_s = 0.9;

  double value(double t) const {
    const double phase = 6.283185307179586476925286766559 * t / period_s;
    const double w =
        0.25 + 0.75 * (0.5 - 0.5 * std::cos(phase)) * 1.667;
    return std::min(1.5, std::max(0.25, w));
  }
  // Earliest t in [0, T) with value(t) == 1; reference time for the
  // w(t) * v(t0) scaling identity.
  double unit_time() const {
    return period_s * std::acos(-0.2) /
           6.283185307179586476925286766559;
  }
};

// Time-dependent 2D velocity field over a bounded region. Velocities are
// (axial, lateral) in m/s but carried as Vec2{x = lateral, z = axial}.
class FlowField {
public:
  virtual ~FlowField() = default;

  // Throws std::invalid_argument if pos lies outside region().
  Vec2 velocity(const Vec2& pos, double t) const;

  virtual const Rect& region() const = 0;

protected:
  virtual Vec2 velocity_unchecked(const Vec2& pos, double t) const = 0;
};

Vec2 eval_flow(const FlowField& field, const Vec2& pos, double t);

// Poiseuille tube: v(r) = v_peak (1 - r^2/R^2) along the vessel axis, zero
// outside radius R (no-slip at the wall). angle_deg is the beam-to-flow
// angle: 90 deg flows purely laterally.
class StraightVessel final : public FlowField {
public:
  StraightVessel(double angle_deg, double radius_m, double peak_mps,
                 Vec2 center, Rect region,
                 std::optional<PulseWaveform> waveform = {});

  const Rect& region() const override { return region_; }
  Vec2 axis_direction() const { return axis_; }
  double radius() const { return radius_; }
  double peak_velocity() const { return peak_; }

protected:
  Vec2 velocity_unchecked(const Vec2& pos, double t) const override;

private:
  Vec2 axis_;
  Vec2 normal_;
  double radius_;
  double peak_;
  Vec2 center_;
  Rect region_;
  std::optional<PulseWaveform> waveform_;
};

// Rigid rotation inside radius R, zero outside.
class SpinningDisk final : public FlowField {
public:
  SpinningDisk(double omega_rad_s, double radius_m, Vec2 center, Rect region);

  const Rect& region() const override { return region_; }
  double omega() const { return omega_; }
  double radius() const { return radius_; }
  Vec2 center() const { return center_; }

protected:
  Vec2 velocity_unchecked(const Vec2& pos, double t) const override;

private:
  double omega_;
  double radius_;
  Vec2 center_;
  Rect region_;
};

// Scenes with disjoint supports evaluated over the union bounding box.
class CompositeScene final : public FlowField {
public:
  explicit CompositeScene(std::vector<std::shared_ptr<const FlowField>> parts);

  const Rect& region() const override { return region_; }

protected:
  Vec2 velocity_unchecked(const Vec2& pos, double t) const override;

private:
  std::vector<std::shared_ptr<const FlowField>> parts_;
  Rect region_;
};

// A sampled window pose: center and orientation in world coordinates plus
// the scene time of the window's first frame.
struct Pose {
  Vec2 center;
  double theta = 0.0;    // [rad]
  double t_start = 0.0;  // [s]
};

struct WindowParams {
  int size = 128;
  int n_frames = 5;
  double pitch_m = 0.05e-3;
  double frame_dt_s = 1e-3;
  double margin_m = 0.0;      // extra clearance kept inside the region
  double time_horizon_s = 0.9;
  int max_attempts = 1000;
  std::optional<Pose> forced_pose;  // bypasses the random pose draw
};

// Ground-truth window: n_frames velocity grids in the window frame.
// frames layout [n_frames][2][size][size], channel 0 axial, 1 lateral, m/s.
struct WindowSample {
  std::vector<float> frames;
  int size = 0;
  int n_frames = 0;
  Pose pose;
  double pitch_m = 0.0;
  double frame_dt_s = 0.0;
};

// Uniformly random admissible pose (rejection sampling, at most
// max_attempts draws), evaluated exactly at rotated world coordinates with
// velocity vectors rotated into the window frame.
WindowSample sample_window(const FlowField& scene, Rng& rng,
                           const WindowParams& params);

// Local window coordinate of pixel (row, col) relative to the window
// center; row advances along the window's axial direction.
inline Vec2 window_pixel_local(int row, int col, int size, double pitch_m) {
  const double half = 0.5 * (size - 1);
  return {(col - half) * pitch_m, (row - half) * pitch_m};
}

// Views a world scene from a window pose, in imaging coordinates where the
// window spans x in [-extent/2, extent/2] and z in [depth_top, depth_top +
// extent]. Used to drive the speckle phantom for a sampled window.
class WindowView final : public FlowField {
public:
  WindowView(std::shared_ptr<const FlowField> world, Pose pose,
             double extent_m, double depth_top_m, double margin_m);

  const Rect& region() const override { return region_; }
  Vec2 world_point(const Vec2& imaging_pos) const;

protected:
  Vec2 velocity_unchecked(const Vec2& pos, double t) const override;

private:
  std::shared_ptr<const FlowField> world_;
  Pose pose_;
  double extent_m_;
  double depth_top_m_;
  Rect region_;
};

}  // namespace savfi
