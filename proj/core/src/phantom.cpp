#include "savfi/phantom.hpp"

#include <cmath>
#include <stdexcept>

namespace savfi {
namespace {

// Uniform point on the region boundary where the local flow enters the
// region; falls back to a uniform interior point when no inflow edge is hit
// (closed orbits, zero flow).
Vec2 respawn_position(const FlowField& field, const Rect& region, double t,
                      Rng& rng) {
  const double w = region.width();
  const double h = region.height();
  const double perimeter = 2.0 * (w + h);
  for (int attempt = 0; attempt < 64; ++attempt) {
    double s = rng.uniform(0.0, perimeter);
    Vec2 p;
    Vec2 inward;
    if (s < w) {
      p = {region.x0 + s, region.z0};
      inward = {0.0, 1.0};
    } else if (s < w + h) {
      p = {region.x1, region.z0 + (s - w)};
      inward = {-1.0, 0.0};
    } else if (s < 2.0 * w + h) {
      p = {region.x1 - (s - w - h), region.z1};
      inward = {0.0, -1.0};
    } else {
      p = {region.x0, region.z1 - (s - 2.0 * w - h)};
      inward = {1.0, 0.0};
    }
    if (field.region().contains(p) &&
        field.velocity(p, t).dot(inward) > 0.0) {
      return p;
    }
  }
  return {rng.uniform(region.x0, region.x1),
          rng.uniform(region.z0, region.z1)};
}

}  // namespace

ScattererCloud seed_scatterers(const Rect& region, double density_per_mm2,
                               Rng rng) {
  if (density_per_mm2 <= 0.0) {
    throw std::invalid_argument("scatterer density must be > 0");
  }
  const double area_mm2 = region.area() * 1e6;
  if (area_mm2 <= 0.0) {
    throw std::invalid_argument("scatterer region has zero area");
  }
  const auto n = static_cast<std::size_t>(
      std::llround(density_per_mm2 * area_mm2));
  if (n == 0) {
    throw std::invalid_argument("region too small for requested density");
  }
  ScattererCloud cloud;
  cloud.region = region;
  cloud.positions.reserve(n);
  cloud.amplitudes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    cloud.positions.push_back({rng.uniform(region.x0, region.x1),
                               rng.uniform(region.z0, region.z1)});
  }
  for (std::size_t i = 0; i < n; ++i) {
    cloud.amplitudes.push_back(static_cast<float>(rng.normal()));
  }
  cloud.rng = rng;
  return cloud;
}

ScattererCloud advect(ScattererCloud cloud, const FlowField& field, double t,
                      double dt) {
  if (dt <= 0.0) {
    throw std::invalid_argument("advection dt must be > 0");
  }
  const Rect& reg = cloud.region;
  for (std::size_t i = 0; i < cloud.positions.size(); ++i) {
    const Vec2 p = cloud.positions[i];
    bool departed = !reg.contains(p);
    Vec2 next = p;
    if (!departed) {
      const Vec2 v1 = field.velocity(p, t);
      const Vec2 mid = p + (0.5 * dt) * v1;
      if (!reg.contains(mid)) {
        departed = true;
      } else {
        const Vec2 v2 = field.velocity(mid, t + 0.5 * dt);
        next = p + dt * v2;
        departed = !reg.contains(next);
      }
    }
    if (departed) {
      cloud.positions[i] = respawn_position(field, reg, t + dt, cloud.rng);
      cloud.amplitudes[i] = static_cast<float>(cloud.rng.normal());
    } else {
      cloud.positions[i] = next;
    }
  }
  return cloud;
}

}  // namespace savfi
