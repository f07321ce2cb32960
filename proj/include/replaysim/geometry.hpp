#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "replaysim/error.hpp"

namespace replaysim {

// Right-handed room coordinates in metres; +x forward, +z up.
struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double distance(Vec3 a, Vec3 b) { return (a - b).norm(); }

inline double wrap_azimuth(double az) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(az + std::numbers::pi, two_pi);
  if (w < 0.0) w += two_pi;
  return w - std::numbers::pi;
}

// Azimuth counterclockwise from +x in the horizontal plane, in [-pi, pi);
// elevation towards +z, in [-pi/2, pi/2].
struct Direction {
  double azimuth = 0.0;
  double elevation = 0.0;

  static Direction normalized(double azimuth, double elevation) {
    if (!std::isfinite(azimuth) || !std::isfinite(elevation))
      throw InvalidArgument("direction angles must be finite");
    // Fold elevations beyond the poles back onto the sphere.
    double el = std::fmod(elevation, 2.0 * std::numbers::pi);
    double az = azimuth;
    if (el > std::numbers::pi) el -= 2.0 * std::numbers::pi;
    if (el < -std::numbers::pi) el += 2.0 * std::numbers::pi;
    if (el > std::numbers::pi / 2) {
      el = std::numbers::pi - el;
      az += std::numbers::pi;
    } else if (el < -std::numbers::pi / 2) {
      el = -std::numbers::pi - el;
      az += std::numbers::pi;
    }
    return {wrap_azimuth(az), el};
  }

  static Direction from_degrees(double az_deg, double el_deg) {
    return normalized(az_deg * std::numbers::pi / 180.0, el_deg * std::numbers::pi / 180.0);
  }

  static Direction from_vector(Vec3 v) {
    const double n = v.norm();
    if (!(n > 0.0)) throw InvalidArgument("direction of a zero vector is undefined");
    const double el = std::asin(std::clamp(v.z / n, -1.0, 1.0));
    const double az = (v.x == 0.0 && v.y == 0.0) ? 0.0 : std::atan2(v.y, v.x);
    return {wrap_azimuth(az), el};
  }

  Vec3 unit() const {
    return {std::cos(elevation) * std::cos(azimuth), std::cos(elevation) * std::sin(azimuth),
            std::sin(elevation)};
  }
};

// Great-circle angle between two directions, in radians.
inline double angular_distance(const Direction& a, const Direction& b) {
  return std::acos(std::clamp(dot(a.unit(), b.unit()), -1.0, 1.0));
}

// Expresses a world-frame vector in the local frame whose +x axis is `orientation`.
inline Vec3 to_local_frame(Vec3 v, const Direction& orientation) {
  const double ca = std::cos(orientation.azimuth), sa = std::sin(orientation.azimuth);
  const Vec3 r{ca * v.x + sa * v.y, -sa * v.x + ca * v.y, v.z};
  const double ce = std::cos(orientation.elevation), se = std::sin(orientation.elevation);
  return {ce * r.x + se * r.z, r.y, -se * r.x + ce * r.z};
}

// Direction of (to - from) seen from an element whose boresight is `frame_orientation`.
inline Direction direction_between(Vec3 from, Vec3 to, const Direction& frame_orientation = {}) {
  const Vec3 v = to - from;
  if (!(v.norm() > 0.0)) throw InvalidArgument("direction between coincident points is undefined");
  return Direction::from_vector(to_local_frame(v, frame_orientation));
}

}  // namespace replaysim
