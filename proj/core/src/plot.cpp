#include "savfi/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace savfi {

void write_pgm(const std::filesystem::path& path,
               const std::vector<float>& normalized, int width, int height) {
  if (normalized.size() !=
      static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw DataError("pgm: pixel count does not match dimensions");
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) {
    throw DataError("cannot open " + path.string());
  }
  os << "P5\n" << width << " " << height << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(width));
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const float v =
          normalized[static_cast<std::size_t>(y) * width + x];
      row[static_cast<std::size_t>(x)] = static_cast<unsigned char>(
          std::clamp(v, 0.0f, 1.0f) * 255.0f + 0.5f);
    }
    os.write(reinterpret_cast<const char*>(row.data()), width);
  }
  if (!os) {
    throw DataError("write failed for " + path.string());
  }
}

int write_quiver_svg(const std::filesystem::path& path,
                     const VelocityEstimate& estimate, int decimate,
                     const std::filesystem::path& background) {
  if (decimate < 1) {
    throw std::invalid_argument("decimation must be >= 1");
  }
  std::ofstream os(path, std::ios::trunc);
  if (!os) {
    throw DataError("cannot open " + path.string());
  }
  const int h = estimate.height;
  const int w = estimate.width;

  double v_max = 0.0;
  for (int r = 0; r < h; r += decimate) {
    for (int c = 0; c < w; c += decimate) {
      v_max = std::max(v_max, std::hypot(estimate.axial(r, c),
                                         estimate.lateral(r, c)));
    }
  }
  // arrow length: one decimation cell at the strongest velocity
  const double scale = v_max > 0.0 ? decimate / v_max : 0.0;

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" "
     << "xmlns:xlink=\"http://www.w3.org/1999/xlink\" width=\"" << w
     << "\" height=\"" << h << "\" viewBox=\"0 0 " << w << " " << h
     << "\">\n";
  if (!background.empty()) {
    os << "  <image xlink:href=\"" << background.generic_string()
       << "\" x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h
       << "\"/>\n";
  }
  os << "  <g stroke=\"#e8b923\" stroke-width=\"0.6\" fill=\"none\">\n";
  int arrows = 0;
  os.precision(3);
  for (int r = 0; r < h; r += decimate) {
    for (int c = 0; c < w; c += decimate) {
      const double dx = estimate.lateral(r, c) * scale;
      const double dz = estimate.axial(r, c) * scale;
      const double x1 = c + 0.5;
      const double y1 = r + 0.5;
      const double x2 = x1 + dx;
      const double y2 = y1 + dz;
      os << "    <line x1=\"" << x1 << "\" y1=\"" << y1 << "\" x2=\"" << x2
         << "\" y2=\"" << y2 << "\"/>\n";
      // arrowhead: short back-strokes at +-30 degrees
      const double len = std::hypot(dx, dz);
      if (len > 1e-6) {
        const double ux = dx / len;
        const double uz = dz / len;
        const double head = std::min(1.5, 0.4 * len);
        const double c30 = 0.866;
        const double s30 = 0.5;
        os << "    <line x1=\"" << x2 << "\" y1=\"" << y2 << "\" x2=\""
           << x2 - head * (c30 * ux - s30 * uz) << "\" y2=\""
           << y2 - head * (s30 * ux + c30 * uz) << "\"/>\n";
        os << "    <line x1=\"" << x2 << "\" y1=\"" << y2 << "\" x2=\""
           << x2 - head * (c30 * ux + s30 * uz) << "\" y2=\""
           << y2 - head * (-s30 * ux + c30 * uz) << "\"/>\n";
      }
      ++arrows;
    }
  }
  os << "  </g>\n</svg>\n";
  if (!os) {
    throw DataError("write failed for " + path.string());
  }
  return arrows;
}

}  // namespace savfi
