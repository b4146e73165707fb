#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace savfi {

// Configuration problems (bad config file, invalid option values). CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Data problems (bad tensor files, dimension mismatches between stages). CLI exit code 3.
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// 2D point / vector in the imaging plane. x is lateral, z is axial (depth). [m]
struct Vec2 {
  double x = 0.0;
  double z = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, z + o.z}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, z - o.z}; }
  Vec2 operator*(double s) const { return {x * s, z * s}; }
  double norm() const { return std::hypot(x, z); }
  double dot(const Vec2& o) const { return x * o.x + z * o.z; }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

// Rotate by theta (radians) in the x-z plane.
inline Vec2 rotate(const Vec2& v, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {c * v.x - s * v.z, s * v.x + c * v.z};
}

// Axis-aligned rectangle, [x0,x1] x [z0,z1]. [m]
struct Rect {
  double x0 = 0.0;
  double z0 = 0.0;
  double x1 = 0.0;
  double z1 = 0.0;

  double width() const { return x1 - x0; }
  double height() const { return z1 - z0; }
  double area() const { return width() * height(); }
  bool contains(const Vec2& p) const {
    return p.x >= x0 && p.x <= x1 && p.z >= z0 && p.z <= z1;
  }
  Rect expanded(double margin) const {
    return {x0 - margin, z0 - margin, x1 + margin, z1 + margin};
  }
};

namespace detail {
inline std::uint64_t mix64(std::uint64_t h) {
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  h *= 0xc4ceb9fe1a85ec53ULL;
  h ^= h >> 33;
  return h;
}
}  // namespace detail

// Seed-splitting rule: every pipeline stage derives its own seed from the one
// global seed and its stage name, so stages can be re-run in isolation.
inline std::uint64_t hash64(std::uint64_t seed, std::string_view name) {
  std::uint64_t h = detail::mix64(seed ^ 0x9e3779b97f4a7c15ULL);
  for (unsigned char c : name) {
    h = detail::mix64(h ^ c);
  }
  return h;
}

inline std::uint64_t hash64(std::uint64_t seed, std::uint64_t value) {
  return detail::mix64(seed ^ detail::mix64(value ^ 0x9e3779b97f4a7c15ULL));
}

}  // namespace savfi
