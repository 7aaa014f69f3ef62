#include "atcline/geo.hpp"

#include <cmath>

namespace atcline::geo {

double haversine_distance(const LatLon& a, const LatLon& b) {
  check_coordinate(a);
  check_coordinate(b);
  const double phi1 = deg2rad(a.lat);
  const double phi2 = deg2rad(b.lat);
  const double dphi = deg2rad(b.lat - a.lat);
  const double dlam = deg2rad(b.lon - a.lon);
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlam / 2.0);
  const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  return 2.0 * kEarthRadiusNmi * std::asin(std::min(1.0, std::sqrt(h)));
}

double initial_bearing(const LatLon& a, const LatLon& b) {
  check_coordinate(a);
  check_coordinate(b);
  if (a.lat == b.lat && wrap180(a.lon - b.lon) == 0.0)
    throw UndefinedBearing("bearing between coincident points");
  const double phi1 = deg2rad(a.lat);
  const double phi2 = deg2rad(b.lat);
  const double dlam = deg2rad(b.lon - a.lon);
  const double y = std::sin(dlam) * std::cos(phi2);
  const double x = std::cos(phi1) * std::sin(phi2) -
                   std::sin(phi1) * std::cos(phi2) * std::cos(dlam);
  return wrap360(rad2deg(std::atan2(y, x)));
}

double cross_track_distance(const LatLon& seg_start, const LatLon& seg_end,
                            const LatLon& p) {
  const double d13 = haversine_distance(seg_start, p) / kEarthRadiusNmi;
  if (d13 == 0.0) return 0.0;
  const double theta13 = deg2rad(initial_bearing(seg_start, p));
  const double theta12 = deg2rad(initial_bearing(seg_start, seg_end));
  // Positive when p lies to the right of the track direction.
  return std::asin(std::sin(d13) * std::sin(theta13 - theta12)) * kEarthRadiusNmi;
}

}  // namespace atcline::geo
