#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mapsem {

// WGS84 equatorial radius; spherical model.
inline constexpr double kEarthRadiusM = 6378137.0;
inline constexpr double kDegToRad = std::numbers::pi / 180.0;
inline constexpr double kRadToDeg = 180.0 / std::numbers::pi;

struct Vec3 {
  double x{0.0};
  double y{0.0};
  double z{0.0};

  friend Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, const Vec3& a) { return {s * a.x, s * a.y, s * a.z}; }
  friend Vec3 operator*(const Vec3& a, double s) { return s * a; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(const Vec3& a) {
  const double n = norm(a);
  return n > 0.0 ? (1.0 / n) * a : a;
}

struct LatLon {
  double lat_deg{0.0};
  double lon_deg{0.0};
  friend bool operator==(const LatLon&, const LatLon&) = default;
};

/// Great-circle distance in meters on a spherical Earth.
inline double haversine_m(const LatLon& a, const LatLon& b) {
  const double phi1 = a.lat_deg * kDegToRad;
  const double phi2 = b.lat_deg * kDegToRad;
  const double dphi = phi2 - phi1;
  const double dlambda = (b.lon_deg - a.lon_deg) * kDegToRad;
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(std::min(1.0, h)));
}

/// Initial bearing from a to b, radians clockwise from north in (-pi, pi].
inline double bearing_rad(const LatLon& a, const LatLon& b) {
  const double phi1 = a.lat_deg * kDegToRad;
  const double phi2 = b.lat_deg * kDegToRad;
  const double dlambda = (b.lon_deg - a.lon_deg) * kDegToRad;
  const double y = std::sin(dlambda) * std::cos(phi2);
  const double x = std::cos(phi1) * std::sin(phi2) - std::sin(phi1) * std::cos(phi2) * std::cos(dlambda);
  return std::atan2(y, x);
}

/// Wraps an angle to [-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  return a;
}

struct EastNorth {
  double east_m{0.0};
  double north_m{0.0};
};

/// Equirectangular tangent plane around an origin. Adequate at city scale.
class LocalFrame {
 public:
  LocalFrame() = default;
  explicit LocalFrame(LatLon origin)
      : origin_(origin), m_per_deg_lat_(kEarthRadiusM * kDegToRad),
        m_per_deg_lon_(kEarthRadiusM * kDegToRad * std::cos(origin.lat_deg * kDegToRad)) {}

  EastNorth to_local(const LatLon& p) const {
    return {(p.lon_deg - origin_.lon_deg) * m_per_deg_lon_, (p.lat_deg - origin_.lat_deg) * m_per_deg_lat_};
  }
  LatLon to_geo(const EastNorth& p) const {
    return {origin_.lat_deg + p.north_m / m_per_deg_lat_, origin_.lon_deg + p.east_m / m_per_deg_lon_};
  }
  const LatLon& origin() const { return origin_; }

 private:
  LatLon origin_{};
  double m_per_deg_lat_{kEarthRadiusM * kDegToRad};
  double m_per_deg_lon_{kEarthRadiusM * kDegToRad};
};

}  // namespace mapsem
