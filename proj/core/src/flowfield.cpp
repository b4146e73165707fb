#include "savfi/flowfield.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace savfi {

Vec2 FlowField::velocity(const Vec2& pos, double t) const {
  if (!region().contains(pos)) {
    std::ostringstream msg;
    msg << "flow evaluated outside region: (" << pos.x << ", " << pos.z
        << ")";
    throw std::invalid_argument(msg.str());
  }
  return velocity_unchecked(pos, t);
}

Vec2 eval_flow(const FlowField& field, const Vec2& pos, double t) {
  return field.velocity(pos, t);
}

StraightVessel::StraightVessel(double angle_deg, double radius_m,
                               double peak_mps, Vec2 center, Rect region,
                               std::optional<PulseWaveform> waveform)
    : radius_(radius_m),
      peak_(peak_mps),
      center_(center),
      region_(region),
      waveform_(waveform) {
  if (radius_m <= 0.0) {
    throw std::invalid_argument("vessel radius must be > 0");
  }
  const double theta = angle_deg * std::numbers::pi / 180.0;
  // beam-to-flow angle: 90 deg -> purely lateral flow
  axis_ = {std::sin(theta), std::cos(theta)};
  normal_ = {-axis_.z, axis_.x};
}

Vec2 StraightVessel::velocity_unchecked(const Vec2& pos, double t) const {
  const double r = std::abs((pos - center_).dot(normal_));
  if (r >= radius_) {
    return {0.0, 0.0};
  }
  const double profile = 1.0 - (r / radius_) * (r / radius_);
  const double w = waveform_ ? waveform_->value(t) : 1.0;
  return axis_ * (peak_ * profile * w);
}

SpinningDisk::SpinningDisk(double omega_rad_s, double radius_m, Vec2 center,
                           Rect region)
    : omega_(omega_rad_s), radius_(radius_m), center_(center),
      region_(region) {
  if (radius_m <= 0.0) {
    throw std::invalid_argument("disk radius must be > 0");
  }
}

Vec2 SpinningDisk::velocity_unchecked(const Vec2& pos, double /*t*/) const {
  const Vec2 r = pos - center_;
  if (r.norm() >= radius_) {
    return {0.0, 0.0};
  }
  return {-omega_ * r.z, omega_ * r.x};
}

CompositeScene::CompositeScene(
    std::vector<std::shared_ptr<const FlowField>> parts)
    : parts_(std::move(parts)) {
  if (parts_.empty()) {
    throw std::invalid_argument("composite scene needs at least one part");
  }
  region_ = parts_.front()->region();
  for (const auto& p : parts_) {
    const Rect& r = p->region();
    region_.x0 = std::min(region_.x0, r.x0);
    region_.z0 = std::min(region_.z0, r.z0);
    region_.x1 = std::max(region_.x1, r.x1);
    region_.z1 = std::max(region_.z1, r.z1);
  }
}

Vec2 CompositeScene::velocity_unchecked(const Vec2& pos, double t) const {
  Vec2 v{0.0, 0.0};
  for (const auto& p : parts_) {
    if (p->region().contains(pos)) {
      v = v + p->velocity(pos, t);  // supports are disjoint
    }
  }
  return v;
}

namespace {

bool pose_admissible(const FlowField& scene, const Pose& pose,
                     double half_extent, double margin) {
  const double h = half_extent + margin;
  const Vec2 corners[4] = {{-h, -h}, {h, -h}, {-h, h}, {h, h}};
  for (const Vec2& c : corners) {
    if (!scene.region().contains(pose.center + rotate(c, pose.theta))) {
      return false;
    }
  }
  return true;
}

}  // namespace

WindowSample sample_window(const FlowField& scene, Rng& rng,
                           const WindowParams& params) {
  if (params.size < 2 || params.n_frames < 1) {
    throw std::invalid_argument("window size/frames invalid");
  }
  const double extent = params.size * params.pitch_m;
  const double half = 0.5 * extent;

  Pose pose;
  if (params.forced_pose) {
    pose = *params.forced_pose;
    if (!pose_admissible(scene, pose, half, params.margin_m)) {
      throw std::invalid_argument("forced pose does not fit inside region");
    }
  } else {
    const Rect& reg = scene.region();
    bool found = false;
    for (int attempt = 0; attempt < params.max_attempts; ++attempt) {
      pose.center = {rng.uniform(reg.x0, reg.x1), rng.uniform(reg.z0, reg.z1)};
      pose.theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
      pose.t_start = rng.uniform(0.0, params.time_horizon_s);
      if (pose_admissible(scene, pose, half, params.margin_m)) {
        found = true;
        break;
      }
    }
    if (!found) {
      throw std::runtime_error(
          "no admissible window pose found; region too small");
    }
  }

  WindowSample sample;
  sample.size = params.size;
  sample.n_frames = params.n_frames;
  sample.pose = pose;
  sample.pitch_m = params.pitch_m;
  sample.frame_dt_s = params.frame_dt_s;
  const int n = params.size;
  sample.frames.resize(static_cast<std::size_t>(params.n_frames) * 2 * n * n);

  for (int f = 0; f < params.n_frames; ++f) {
    const double t = pose.t_start + f * params.frame_dt_s;
    float* axial = sample.frames.data() +
                   (static_cast<std::size_t>(f) * 2) * n * n;
    float* lateral = axial + static_cast<std::size_t>(n) * n;
    for (int row = 0; row < n; ++row) {
      for (int col = 0; col < n; ++col) {
        const Vec2 local = window_pixel_local(row, col, n, params.pitch_m);
        const Vec2 world = pose.center + rotate(local, pose.theta);
        const Vec2 v = rotate(scene.velocity(world, t), -pose.theta);
        axial[row * n + col] = static_cast<float>(v.z);
        lateral[row * n + col] = static_cast<float>(v.x);
      }
    }
  }
  return sample;
}

WindowView::WindowView(std::shared_ptr<const FlowField> world, Pose pose,
                       double extent_m, double depth_top_m, double margin_m)
    : world_(std::move(world)),
      pose_(pose),
      extent_m_(extent_m),
      depth_top_m_(depth_top_m) {
  const double half = 0.5 * extent_m;
  region_ = Rect{-half, depth_top_m, half, depth_top_m + extent_m}
                .expanded(margin_m);
}

Vec2 WindowView::world_point(const Vec2& imaging_pos) const {
  const Vec2 local{imaging_pos.x,
                   imaging_pos.z - depth_top_m_ - 0.5 * extent_m_};
  return pose_.center + rotate(local, pose_.theta);
}

Vec2 WindowView::velocity_unchecked(const Vec2& pos, double t) const {
  const Vec2 world = world_point(pos);
  const Vec2 v = world_->velocity(world, pose_.t_start + t);
  return rotate(v, -pose_.theta);
}

}  // namespace savfi
