#pragma once

#include <filesystem>
#include <vector>

#include "savfi/echopiv.hpp"

namespace savfi {

// Binary (P5) 8-bit grayscale image; values clamped to [0, 1] * 255.
void write_pgm(const std::filesystem::path& path,
               const std::vector<float>& normalized, int width, int height);

// Standalone SVG quiver of a velocity field, one arrow per `decimate`-th
// pixel in each direction, optionally referencing a background image file.
// Returns the number of arrows drawn.
int write_quiver_svg(const std::filesystem::path& path,
                     const VelocityEstimate& estimate, int decimate = 8,
                     const std::filesystem::path& background = {});

}  // namespace savfi
