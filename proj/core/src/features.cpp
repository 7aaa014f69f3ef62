#include "atcline/features.hpp"

#include <algorithm>
#include <cmath>

#include "atcline/io.hpp"
#include "atcline/util.hpp"

namespace atcline {

WeatherTable::WeatherTable(std::vector<WeatherRecord> records)
    : records_(std::move(records)) {
  std::sort(records_.begin(), records_.end(),
            [](const WeatherRecord& a, const WeatherRecord& b) { return a.t < b.t; });
  for (const auto& r : records_) {
    if (r.wind_speed < 0.0 || r.visibility < 0.0)
      throw OutOfRange("negative weather magnitude at t=" + fmt_double(r.t));
    if (r.wind_dir < 0.0 || r.wind_dir >= 360.0)
      throw OutOfRange("wind_dir outside [0,360) at t=" + fmt_double(r.t));
  }
}

WeatherTable WeatherTable::from_csv(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  std::vector<WeatherRecord> records;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty() || (i == 0 && line == "t,wind_speed,wind_dir,visibility"))
      continue;
    const auto f = split(line, ',');
    if (f.size() != 4)
      throw IoError("bad weather row " + std::to_string(i + 1) + " in " + path.string());
    records.push_back({parse_double(trim(f[0])), parse_double(trim(f[1])),
                       parse_double(trim(f[2])), parse_double(trim(f[3]))});
  }
  return WeatherTable(std::move(records));
}

std::optional<WeatherRecord> WeatherTable::at(double t) const {
  const auto it = std::upper_bound(
      records_.begin(), records_.end(), t,
      [](double v, const WeatherRecord& r) { return v < r.t; });
  if (it == records_.begin()) return std::nullopt;
  return *(it - 1);
}

WtcTable WtcTable::from_csv(const std::filesystem::path& path) {
  WtcTable t;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty() || (i == 0 && line == "type,wtc")) continue;
    const auto f = split(line, ',');
    if (f.size() != 2)
      throw IoError("bad aircraft-type row " + std::to_string(i + 1) + " in " +
                    path.string());
    const auto wtc = trim(f[1]);
    if (wtc.size() != 1)
      throw IoError("wtc must be a single letter: " + std::string(wtc));
    t.add(std::string(trim(f[0])), wtc[0]);
  }
  return t;
}

void WtcTable::add(const std::string& key, char wtc) {
  if (wtc != 'L' && wtc != 'M' && wtc != 'H' && wtc != 'J')
    throw BadConfig(std::string("wtc must be one of L/M/H/J, got ") + wtc);
  by_key_[to_upper(key)] = wtc;
}

char WtcTable::lookup(const std::string& callsign) const {
  const auto upper = to_upper(callsign);
  if (const auto it = by_key_.find(upper); it != by_key_.end()) return it->second;
  if (upper.size() > 3)
    if (const auto it = by_key_.find(upper.substr(0, 3)); it != by_key_.end())
      return it->second;
  return 'M';
}

std::vector<Waypoint> load_waypoints_csv(const std::filesystem::path& path) {
  std::vector<Waypoint> out;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty() || (i == 0 && line == "name,lat,lon")) continue;
    const auto f = split(line, ',');
    if (f.size() != 3)
      throw IoError("bad waypoint row " + std::to_string(i + 1) + " in " +
                    path.string());
    Waypoint w{std::string(trim(f[0])), parse_double(trim(f[1])),
               parse_double(trim(f[2]))};
    geo::check_coordinate({w.lat, w.lon});
    out.push_back(std::move(w));
  }
  return out;
}

const std::vector<std::string>& StructuredFeatures::names() {
  static const std::vector<std::string> kNames{
      "is_altitude_cmd", "velocity",      "head",
      "cmd_value_norm",  "wtc_L",         "wtc_M",
      "wtc_H",           "wtc_J",         "cas",
      "alt",             "hdg_sin",       "hdg_cos",
      "distance_to_airport", "bearing_to_airport", "traffic_density",
      "hour_sin",        "hour_cos",      "wind_speed",
      "visibility",      "wx_present",    "route_xtrack",
      "nearest_wpt_dist", "wpt_present"};
  return kNames;
}

double StructuredFeatures::at(const std::string& name) const {
  const auto& all = names();
  const auto it = std::find(all.begin(), all.end(), name);
  if (it == all.end()) throw BadSlot("unknown feature slot: " + name);
  return values.at(static_cast<std::size_t>(it - all.begin()));
}

double command_value_scale(Channel ctype) {
  switch (ctype) {
    case Channel::altitude: return 10000.0;
    case Channel::speed: return 100.0;
    default: return 360.0;
  }
}

StructuredFeatures assemble_features(const ParsedCommand& cmd, const Trajectory& traj,
                                     double t,
                                     const std::vector<AircraftState>& all_states,
                                     const FeatureContext& ctx) {
  const auto state = state_at(traj, t);  // throws OutOfRange off-span
  const geo::LatLon here{state.lat, state.lon};

  StructuredFeatures f;
  f.values.assign(StructuredFeatures::count(), 0.0);
  auto set = [&f](std::size_t i, double v) { f.values[i] = v; };

  set(0, cmd.ctype == Channel::altitude ? 1.0 : 0.0);
  set(1, cmd.ctype == Channel::speed ? 1.0 : 0.0);
  set(2, cmd.ctype == Channel::heading ? 1.0 : 0.0);
  set(3, static_cast<double>(cmd.value) / command_value_scale(cmd.ctype));

  const char wtc = ctx.wtc.lookup(traj.callsign);
  set(4, wtc == 'L' ? 1.0 : 0.0);
  set(5, wtc == 'M' ? 1.0 : 0.0);
  set(6, wtc == 'H' ? 1.0 : 0.0);
  set(7, wtc == 'J' ? 1.0 : 0.0);

  set(8, state.gs);  // ground speed stands in for cas
  set(9, state.alt);
  set(10, std::sin(deg2rad(state.hdg)));
  set(11, std::cos(deg2rad(state.hdg)));

  const geo::LatLon airport{ctx.airport.lat, ctx.airport.lon};
  const double dist = geo::haversine_distance(here, airport);
  set(12, dist);
  set(13, dist < 1e-9 ? 0.0 : geo::initial_bearing(here, airport));

  int density = 0;
  for (const auto& other : all_states) {
    if (other.callsign == traj.callsign) continue;
    if (geo::haversine_distance(here, {other.lat, other.lon}) <=
        ctx.density_radius_nmi)
      ++density;
  }
  set(14, static_cast<double>(density));

  const double hour_angle = 2.0 * kPi * std::fmod(t, 86400.0) / 86400.0;
  set(15, std::sin(hour_angle));
  set(16, std::cos(hour_angle));

  if (ctx.weather) {
    if (const auto wx = ctx.weather->at(t)) {
      set(17, wx->wind_speed);
      set(18, wx->visibility);
      set(19, 1.0);
    }
  }

  if (ctx.waypoints.size() >= 2) {
    double nearest = std::numeric_limits<double>::infinity();
    for (const auto& w : ctx.waypoints)
      nearest = std::min(nearest, geo::haversine_distance(here, {w.lat, w.lon}));
    // Route leg whose closer endpoint is nearest to the aircraft.
    double best_anchor = std::numeric_limits<double>::infinity();
    double xtrack = 0.0;
    for (std::size_t i = 0; i + 1 < ctx.waypoints.size(); ++i) {
      const geo::LatLon a{ctx.waypoints[i].lat, ctx.waypoints[i].lon};
      const geo::LatLon b{ctx.waypoints[i + 1].lat, ctx.waypoints[i + 1].lon};
      const double anchor =
          std::min(geo::haversine_distance(here, a), geo::haversine_distance(here, b));
      if (anchor < best_anchor) {
        best_anchor = anchor;
        xtrack = geo::cross_track_distance(a, b, here);
      }
    }
    set(20, xtrack);
    set(21, nearest);
    set(22, 1.0);
  } else if (ctx.waypoints.size() == 1) {
    set(21, geo::haversine_distance(
                here, {ctx.waypoints[0].lat, ctx.waypoints[0].lon}));
    set(22, 1.0);
  }

  for (const double v : f.values)
    if (!std::isfinite(v)) throw NonFinite("feature vector contains a non-finite value");
  return f;
}

}  // namespace atcline
