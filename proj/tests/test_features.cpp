#include <cmath>
#include <filesystem>

#include <doctest.h>

#include "atcline/features.hpp"
#include "atcline/io.hpp"
#include "atcline/rng.hpp"
#include "atcline/util.hpp"

using namespace atcline;

namespace {

Trajectory hover_track(const std::string& callsign, double lat, double lon,
                       double hdg = 45.0) {
  Trajectory traj;
  traj.callsign = callsign;
  for (int i = 0; i < 200; ++i)
    traj.points.push_back({1000.0 + i, lat, lon, 8000.0, 250.0, hdg});
  return traj;
}

ParsedCommand speed_cmd() {
  ParsedCommand cmd;
  cmd.callsign = "QFA1";
  cmd.ctype = Channel::speed;
  cmd.value = 210;
  cmd.start_t = 1050.0;
  cmd.duration_s = 4.0;
  return cmd;
}

FeatureContext plain_context() {
  FeatureContext ctx;
  ctx.airport = {"WSSS", 1.3502, 103.994, 22.0};
  return ctx;
}

}  // namespace

TEST_CASE("command one-hots follow the type") {
  const auto traj = hover_track("QFA1", 1.5, 104.2);
  const auto ctx = plain_context();
  auto cmd = speed_cmd();

  auto f = assemble_features(cmd, traj, 1100.0, {}, ctx);
  CHECK(f.at("velocity") == 1.0);
  CHECK(f.at("head") == 0.0);
  CHECK(f.at("is_altitude_cmd") == 0.0);
  CHECK(f.at("cmd_value_norm") == doctest::Approx(2.10));

  cmd.ctype = Channel::altitude;
  cmd.value = 11000;
  f = assemble_features(cmd, traj, 1100.0, {}, ctx);
  CHECK(f.at("is_altitude_cmd") == 1.0);
  CHECK(f.at("cmd_value_norm") == doctest::Approx(1.1));
}

TEST_CASE("traffic density counts others inside the radius") {
  // Others at roughly 5, 9, and 11 nmi from the subject: expect 2 inside 10.
  const double nm = 1.0 / 60.04;  // degrees latitude per nautical mile
  const auto subject = hover_track("QFA1", 1.5, 104.0);
  const std::vector<Trajectory> traffic{
      subject,
      hover_track("AAA1", 1.5 + 5.0 * nm, 104.0),
      hover_track("BBB2", 1.5 + 9.0 * nm, 104.0),
      hover_track("CCC3", 1.5 - 11.0 * nm, 104.0),
  };
  const auto states = states_at(traffic, 1100.0);
  REQUIRE(states.size() == 4);

  // Brute-force oracle over pairwise distances.
  int oracle = 0;
  for (const auto& s : states) {
    if (s.callsign == "QFA1") continue;
    if (geo::haversine_distance({1.5, 104.0}, {s.lat, s.lon}) <= 10.0) ++oracle;
  }
  CHECK(oracle == 2);

  const auto f =
      assemble_features(speed_cmd(), subject, 1100.0, states, plain_context());
  CHECK(f.at("traffic_density") == 2.0);
}

TEST_CASE("density ignores identity labels of other aircraft") {
  const double nm = 1.0 / 60.04;
  const auto subject = hover_track("QFA1", 1.5, 104.0);
  auto near1 = hover_track("AAA1", 1.5 + 4.0 * nm, 104.0);
  auto near2 = hover_track("BBB2", 1.5 - 6.0 * nm, 104.0);
  auto swapped1 = near1;
  swapped1.callsign = "BBB2";
  auto swapped2 = near2;
  swapped2.callsign = "AAA1";

  const auto f1 = assemble_features(speed_cmd(), subject, 1100.0,
                                    states_at({subject, near1, near2}, 1100.0),
                                    plain_context());
  const auto f2 = assemble_features(speed_cmd(), subject, 1100.0,
                                    states_at({subject, swapped1, swapped2}, 1100.0),
                                    plain_context());
  CHECK(f1.values == f2.values);
}

TEST_CASE("heading and hour encodings stay on the unit circle") {
  Rng rng(2024);
  const auto ctx = plain_context();
  for (int i = 0; i < 50; ++i) {
    const double hdg = rng.uniform(0.0, 360.0);
    auto traj = hover_track("QFA1", 1.5, 104.2, hdg);
    const double t = 1000.0 + std::floor(rng.uniform(0.0, 199.0));
    const auto f = assemble_features(speed_cmd(), traj, t, {}, ctx);
    const double h = f.at("hdg_sin") * f.at("hdg_sin") + f.at("hdg_cos") * f.at("hdg_cos");
    const double c = f.at("hour_sin") * f.at("hour_sin") + f.at("hour_cos") * f.at("hour_cos");
    CHECK(std::fabs(h - 1.0) <= 1e-9);
    CHECK(std::fabs(c - 1.0) <= 1e-9);
  }
}

TEST_CASE("missing weather zeroes the slots with presence flag down") {
  const auto traj = hover_track("QFA1", 1.5, 104.2);
  const auto f = assemble_features(speed_cmd(), traj, 1100.0, {}, plain_context());
  CHECK(f.at("wind_speed") == 0.0);
  CHECK(f.at("visibility") == 0.0);
  CHECK(f.at("wx_present") == 0.0);
  CHECK(f.at("wpt_present") == 0.0);
  for (const double v : f.values) CHECK(std::isfinite(v));
}

TEST_CASE("weather lookup picks the latest record at or before t") {
  WeatherTable wx({{1000.0, 8.0, 270.0, 9999.0}, {1060.0, 12.0, 280.0, 8000.0}});
  CHECK_FALSE(wx.at(999.0).has_value());
  CHECK(wx.at(1000.0)->wind_speed == 8.0);
  CHECK(wx.at(1059.0)->wind_speed == 8.0);
  CHECK(wx.at(1060.0)->wind_speed == 12.0);
  CHECK(wx.at(99999.0)->visibility == 8000.0);

  auto ctx = plain_context();
  ctx.weather = wx;
  const auto traj = hover_track("QFA1", 1.5, 104.2);
  const auto f = assemble_features(speed_cmd(), traj, 1100.0, {}, ctx);
  CHECK(f.at("wind_speed") == 12.0);
  CHECK(f.at("visibility") == 8000.0);
  CHECK(f.at("wx_present") == 1.0);
}

TEST_CASE("wtc lookup falls back from callsign to airline to M") {
  WtcTable t;
  t.add("QFA1", 'H');
  t.add("SIA", 'J');
  CHECK(t.lookup("QFA1") == 'H');
  CHECK(t.lookup("SIA368") == 'J');
  CHECK(t.lookup("BAW123") == 'M');
  CHECK_THROWS_AS(t.add("XXX", 'Z'), BadConfig);

  auto ctx = plain_context();
  ctx.wtc = t;
  const auto traj = hover_track("SIA368", 1.5, 104.2);
  auto cmd = speed_cmd();
  cmd.callsign = "SIA368";
  const auto f = assemble_features(cmd, traj, 1100.0, {}, ctx);
  CHECK(f.at("wtc_J") == 1.0);
  CHECK(f.at("wtc_L") + f.at("wtc_M") + f.at("wtc_H") + f.at("wtc_J") == 1.0);
}

TEST_CASE("one-hot groups always sum to one") {
  Rng rng(88);
  const auto traj = hover_track("QFA1", 1.5, 104.2);
  const auto ctx = plain_context();
  for (int i = 0; i < 30; ++i) {
    auto cmd = speed_cmd();
    const int t = static_cast<int>(rng.uniform_int(0, 2));
    cmd.ctype = t == 0 ? Channel::altitude : t == 1 ? Channel::speed : Channel::heading;
    cmd.value = t == 0 ? 9000 : t == 1 ? 250 : 180;
    const auto f = assemble_features(cmd, traj, 1100.0, {}, ctx);
    CHECK(f.at("is_altitude_cmd") + f.at("velocity") + f.at("head") == 1.0);
    CHECK(f.at("wtc_L") + f.at("wtc_M") + f.at("wtc_H") + f.at("wtc_J") == 1.0);
  }
}

TEST_CASE("airport geometry slots match direct computation") {
  const auto traj = hover_track("QFA1", 1.5, 104.2);
  const auto ctx = plain_context();
  const auto f = assemble_features(speed_cmd(), traj, 1100.0, {}, ctx);
  const geo::LatLon here{1.5, 104.2};
  const geo::LatLon apt{ctx.airport.lat, ctx.airport.lon};
  CHECK(f.at("distance_to_airport") ==
        doctest::Approx(geo::haversine_distance(here, apt)));
  CHECK(f.at("bearing_to_airport") ==
        doctest::Approx(geo::initial_bearing(here, apt)));
}

TEST_CASE("route slots populate only with a waypoint list") {
  auto ctx = plain_context();
  ctx.waypoints = {{"ALPHA", 1.2, 104.0}, {"BRAVO", 1.8, 104.0}};
  const auto traj = hover_track("QFA1", 1.5, 104.1);
  const auto f = assemble_features(speed_cmd(), traj, 1100.0, {}, ctx);
  CHECK(f.at("wpt_present") == 1.0);
  CHECK(f.at("nearest_wpt_dist") > 0.0);
  // Track runs due north; the aircraft sits 0.1 degrees east => right of track,
  // roughly 6 nmi.
  CHECK(f.at("route_xtrack") == doctest::Approx(6.0).epsilon(0.01));
}

TEST_CASE("off-span sample times are rejected") {
  const auto traj = hover_track("QFA1", 1.5, 104.2);
  CHECK_THROWS_AS(assemble_features(speed_cmd(), traj, 10.0, {}, plain_context()),
                  OutOfRange);
}

TEST_CASE("feature schema is fixed and name-addressable") {
  CHECK(StructuredFeatures::count() == 23);
  CHECK(StructuredFeatures::names()[0] == "is_altitude_cmd");
  CHECK(StructuredFeatures::names()[1] == "velocity");
  CHECK(StructuredFeatures::names()[2] == "head");
  CHECK(StructuredFeatures::names()[8] == "cas");
  const auto traj = hover_track("QFA1", 1.5, 104.2);
  const auto f = assemble_features(speed_cmd(), traj, 1100.0, {}, plain_context());
  CHECK(f.values.size() == StructuredFeatures::count());
  CHECK_THROWS_AS(f.at("no_such_slot"), BadSlot);
}

TEST_CASE("weather and aircraft-type csv loaders") {
  const auto dir = std::filesystem::temp_directory_path() / "atcline_feat_io";
  std::filesystem::create_directories(dir);

  atcline::write_text_file(dir / "wx.csv",
                           "t,wind_speed,wind_dir,visibility\n"
                           "1000,8,270,9999\n1060,12,280,8000\n");
  const auto wx = WeatherTable::from_csv(dir / "wx.csv");
  CHECK(wx.size() == 2);
  CHECK(wx.at(1030.0)->wind_dir == 270.0);

  atcline::write_text_file(dir / "actype.csv", "type,wtc\nQFA1,H\nSIA,J\n");
  const auto wtc = WtcTable::from_csv(dir / "actype.csv");
  CHECK(wtc.lookup("QFA1") == 'H');
  CHECK(wtc.lookup("SIA55") == 'J');

  atcline::write_text_file(dir / "wpts.csv", "name,lat,lon\nALPHA,1.2,104\n");
  const auto wpts = load_waypoints_csv(dir / "wpts.csv");
  REQUIRE(wpts.size() == 1);
  CHECK(wpts[0].name == "ALPHA");
  std::filesystem::remove_all(dir);
}
