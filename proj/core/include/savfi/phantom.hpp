#pragma once

#include <vector>

#include "savfi/common.hpp"
#include "savfi/flowfield.hpp"
#include "savfi/rng.hpp"

namespace savfi {

// Point-scatterer cloud advected by a flow field. The cloud owns its RNG so
// respawns stay deterministic regardless of the caller.
struct ScattererCloud {
  std::vector<Vec2> positions;
  std::vector<float> amplitudes;
  Rect region;
  Rng rng{0};
};

// N = round(density * area[mm^2]) scatterers, uniform positions, standard
// normal amplitudes.
ScattererCloud seed_scatterers(const Rect& region, double density_per_mm2,
                               Rng rng);

// One midpoint (RK2) step p' = p + dt * v(p + dt/2 * v(p, t), t + dt/2).
// Scatterers that step outside the region (or whose midpoint does) are
// respawned with a fresh amplitude, preferentially on an inflow boundary.
ScattererCloud advect(ScattererCloud cloud, const FlowField& field, double t,
                      double dt);

}  // namespace savfi
