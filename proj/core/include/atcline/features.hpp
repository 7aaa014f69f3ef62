#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "atcline/geo.hpp"
#include "atcline/phrase.hpp"
#include "atcline/trajectory.hpp"

namespace atcline {

struct AirportRef {
  std::string icao = "WSSS";
  double lat = 1.3502;
  double lon = 103.994;
  double elevation_ft = 22.0;
};

struct WeatherRecord {
  double t = 0.0;
  double wind_speed = 0.0;  // knots
  double wind_dir = 0.0;    // degrees [0,360)
  double visibility = 0.0;  // meters
};

// Step-function lookup: the latest record at or before t.
class WeatherTable {
 public:
  explicit WeatherTable(std::vector<WeatherRecord> records);
  static WeatherTable from_csv(const std::filesystem::path& path);

  std::optional<WeatherRecord> at(double t) const;
  std::size_t size() const { return records_.size(); }

 private:
  std::vector<WeatherRecord> records_;  // sorted by t
};

// Wake turbulence class per aircraft. Keys match the full callsign first,
// then its 3-letter airline prefix; anything else defaults to M.
class WtcTable {
 public:
  WtcTable() = default;
  static WtcTable from_csv(const std::filesystem::path& path);

  void add(const std::string& key, char wtc);
  char lookup(const std::string& callsign) const;

 private:
  std::map<std::string, char> by_key_;
};

struct Waypoint {
  std::string name;
  double lat = 0.0;
  double lon = 0.0;
};

std::vector<Waypoint> load_waypoints_csv(const std::filesystem::path& path);

// Everything assemble_features needs besides the sample itself.
struct FeatureContext {
  AirportRef airport;
  WtcTable wtc;
  std::optional<WeatherTable> weather;
  std::vector<Waypoint> waypoints;  // empty = no route features
  double density_radius_nmi = 10.0;
};

// Fixed-order named feature vector; the order defines the dataset schema.
struct StructuredFeatures {
  std::vector<double> values;

  static const std::vector<std::string>& names();
  static std::size_t count() { return names().size(); }

  double at(const std::string& name) const;
};

// Per-type scale for cmd_value_norm: feet/1e4, knots/1e2, degrees/360.
double command_value_scale(Channel ctype);

StructuredFeatures assemble_features(const ParsedCommand& cmd, const Trajectory& traj,
                                     double t,
                                     const std::vector<AircraftState>& all_states,
                                     const FeatureContext& ctx);

}  // namespace atcline
