#include <cmath>

#include <doctest.h>

#include "atcline/geo.hpp"
#include "atcline/rng.hpp"

using atcline::Rng;
using namespace atcline::geo;

namespace {

// Independent distance formula: spherical law of cosines.
double law_of_cosines_distance(const LatLon& a, const LatLon& b) {
  const double p1 = atcline::deg2rad(a.lat);
  const double p2 = atcline::deg2rad(b.lat);
  const double dl = atcline::deg2rad(b.lon - a.lon);
  double c = std::sin(p1) * std::sin(p2) + std::cos(p1) * std::cos(p2) * std::cos(dl);
  c = std::min(1.0, std::max(-1.0, c));
  return kEarthRadiusNmi * std::acos(c);
}

// Independent bearing via 3D unit vectors: azimuth of the projection of
// (b - a) onto the local east/north tangent plane at a.
double vector_azimuth(const LatLon& a, const LatLon& b) {
  const auto unit = [](const LatLon& p) {
    const double lat = atcline::deg2rad(p.lat);
    const double lon = atcline::deg2rad(p.lon);
    return std::array<double, 3>{std::cos(lat) * std::cos(lon),
                                 std::cos(lat) * std::sin(lon), std::sin(lat)};
  };
  const auto va = unit(a);
  const auto vb = unit(b);
  const double lat = atcline::deg2rad(a.lat);
  const double lon = atcline::deg2rad(a.lon);
  const std::array<double, 3> east{-std::sin(lon), std::cos(lon), 0.0};
  const std::array<double, 3> north{-std::sin(lat) * std::cos(lon),
                                    -std::sin(lat) * std::sin(lon), std::cos(lat)};
  std::array<double, 3> d{vb[0] - va[0], vb[1] - va[1], vb[2] - va[2]};
  const double e = d[0] * east[0] + d[1] * east[1] + d[2] * east[2];
  const double n = d[0] * north[0] + d[1] * north[1] + d[2] * north[2];
  return atcline::wrap360(atcline::rad2deg(std::atan2(e, n)));
}

}  // namespace

TEST_CASE("haversine identity and equator arc") {
  CHECK(haversine_distance({1.5, 103.0}, {1.5, 103.0}) == 0.0);
  CHECK(haversine_distance({0.0, 0.0}, {0.0, 1.0}) ==
        doctest::Approx(60.0).epsilon(0.002));
}

TEST_CASE("haversine matches law-of-cosines oracle") {
  const LatLon a{1.359, 103.989};
  const LatLon b{1.0, 104.5};
  CHECK(haversine_distance(a, b) ==
        doctest::Approx(law_of_cosines_distance(a, b)).epsilon(1e-6));

  Rng rng(42);
  for (int i = 0; i < 200; ++i) {
    const LatLon p{rng.uniform(-80.0, 80.0), rng.uniform(-179.0, 179.0)};
    const LatLon q{rng.uniform(-80.0, 80.0), rng.uniform(-179.0, 179.0)};
    const double hv = haversine_distance(p, q);
    const double lc = law_of_cosines_distance(p, q);
    if (lc > 1.0) CHECK(hv == doctest::Approx(lc).epsilon(1e-6));
    CHECK(hv == doctest::Approx(haversine_distance(q, p)));
    CHECK(hv >= 0.0);
  }
}

TEST_CASE("haversine rejects bad coordinates") {
  CHECK_THROWS_AS(haversine_distance({91.0, 0.0}, {0.0, 0.0}),
                  atcline::BadCoordinate);
}

TEST_CASE("initial bearing cardinal directions") {
  CHECK(initial_bearing({0.0, 0.0}, {1.0, 0.0}) == doctest::Approx(0.0));
  CHECK(initial_bearing({0.0, 0.0}, {0.0, 1.0}) == doctest::Approx(90.0));
  CHECK_THROWS_AS(initial_bearing({10.0, 20.0}, {10.0, 20.0}),
                  atcline::UndefinedBearing);
}

TEST_CASE("initial bearing matches vector azimuth oracle") {
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const LatLon p{rng.uniform(-80.0, 80.0), rng.uniform(-179.0, 179.0)};
    const LatLon q{p.lat + rng.uniform(-2.0, 2.0), p.lon + rng.uniform(-2.0, 2.0)};
    if (p.lat == q.lat && p.lon == q.lon) continue;
    const double b = initial_bearing(p, q);
    const double oracle = vector_azimuth(p, q);
    const double diff = std::fabs(atcline::wrap180(b - oracle));
    CHECK(diff < 1e-6);
    CHECK(b >= 0.0);
    CHECK(b < 360.0);
  }
}

TEST_CASE("distances satisfy the triangle inequality") {
  Rng rng(1234);
  for (int i = 0; i < 300; ++i) {
    const LatLon a{rng.uniform(-80.0, 80.0), rng.uniform(-170.0, 170.0)};
    const LatLon b{rng.uniform(-80.0, 80.0), rng.uniform(-170.0, 170.0)};
    const LatLon c{rng.uniform(-80.0, 80.0), rng.uniform(-170.0, 170.0)};
    CHECK(haversine_distance(a, c) <=
          haversine_distance(a, b) + haversine_distance(b, c) + 1e-9);
  }
}

TEST_CASE("cross-track sign convention") {
  // Eastbound track on the equator; a point to the south lies to the right.
  const LatLon s{0.0, 0.0};
  const LatLon e{0.0, 2.0};
  CHECK(cross_track_distance(s, e, {-0.5, 1.0}) > 0.0);
  CHECK(cross_track_distance(s, e, {0.5, 1.0}) < 0.0);
  CHECK(cross_track_distance(s, e, {0.0, 1.0}) == doctest::Approx(0.0));
  // Magnitude of 0.5 degrees of arc offset is about 30 nmi.
  CHECK(std::fabs(cross_track_distance(s, e, {-0.5, 1.0})) ==
        doctest::Approx(30.0).epsilon(0.01));
}

TEST_CASE("equirectangular projection scales with reference latitude") {
  const LatLon origin{45.0, 10.0};
  const auto p = project_equirect({46.0, 10.0}, origin, 45.0);
  CHECK(p.x == doctest::Approx(0.0));
  CHECK(p.y == doctest::Approx(60.04).epsilon(0.001));
  const auto q = project_equirect({45.0, 11.0}, origin, 45.0);
  CHECK(q.y == doctest::Approx(0.0));
  CHECK(q.x == doctest::Approx(60.04 * std::cos(atcline::deg2rad(45.0))).epsilon(0.001));
}
