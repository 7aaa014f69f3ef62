#pragma once

#include "atcline/errors.hpp"
#include "atcline/util.hpp"

namespace atcline::geo {

// Earth radius in nautical miles for all spherical math.
constexpr double kEarthRadiusNmi = 3440.065;

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

inline void check_coordinate(const LatLon& p) {
  if (!(p.lat >= -90.0 && p.lat <= 90.0) || !(p.lon >= -180.0 && p.lon <= 360.0))
    throw BadCoordinate("lat/lon out of range: " + fmt_double(p.lat) + "," +
                        fmt_double(p.lon));
}

// Great-circle distance in nautical miles (haversine form, stable for
// short distances).
double haversine_distance(const LatLon& a, const LatLon& b);

// Forward azimuth from a to b, degrees in [0, 360).
double initial_bearing(const LatLon& a, const LatLon& b);

// Signed cross-track distance of point p from the great circle through
// seg_start toward seg_end, nautical miles. Positive to the right of track.
double cross_track_distance(const LatLon& seg_start, const LatLon& seg_end,
                            const LatLon& p);

// Local equirectangular projection: east/north offsets in nautical miles
// from `origin`, with longitude scaled by cos(ref_lat).
struct LocalXY {
  double x = 0.0;  // east, nmi
  double y = 0.0;  // north, nmi
};

inline LocalXY project_equirect(const LatLon& p, const LatLon& origin,
                                double ref_lat_deg) {
  const double k = kPi / 180.0 * kEarthRadiusNmi;
  return {wrap180(p.lon - origin.lon) * std::cos(deg2rad(ref_lat_deg)) * k,
          (p.lat - origin.lat) * k};
}

}  // namespace atcline::geo
