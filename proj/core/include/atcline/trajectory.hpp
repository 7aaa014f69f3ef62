#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "atcline/errors.hpp"

namespace atcline {

struct TrackPoint {
  double t = 0.0;    // seconds, epoch
  double lat = 0.0;  // degrees
  double lon = 0.0;  // degrees
  double alt = 0.0;  // feet
  double gs = 0.0;   // knots
  double hdg = 0.0;  // degrees in [0, 360)
};

// Interpolated kinematic state of one aircraft at a query time.
struct AircraftState {
  std::string callsign;
  double t = 0.0;
  double lat = 0.0;
  double lon = 0.0;
  double alt = 0.0;
  double gs = 0.0;
  double hdg = 0.0;
};

struct Trajectory {
  std::string callsign;
  std::vector<TrackPoint> points;

  double start_t() const { return points.front().t; }
  double end_t() const { return points.back().t; }
  bool covers(double t) const {
    return !points.empty() && t >= start_t() && t <= end_t();
  }
};

// Throws if a point violates field ranges or timestamps fail to increase.
void validate_trajectory(const Trajectory& traj);

// True when points are spaced exactly 1 s apart on integer-aligned ticks.
bool is_uniform_1hz(const Trajectory& traj);

// Linear interpolation onto integer-second ticks; heading interpolated on
// the circle. Gaps wider than max_gap_s split the track into separate
// segments, dropping segments shorter than two ticks.
std::vector<Trajectory> resample_1hz(const Trajectory& traj,
                                     double max_gap_s = 10.0);

// Interpolated state at time t (heading on the circle). t outside the span
// throws OutOfRange.
AircraftState state_at(const Trajectory& traj, double t);

// States of every trajectory covering t, sorted by callsign.
std::vector<AircraftState> states_at(const std::vector<Trajectory>& trajs,
                                     double t);

// CSV with header `t,callsign,lat,lon,alt_ft,gs_kt,hdg_deg`. Rows grouped by
// callsign and sorted by time on load; output trajectories sorted by callsign.
std::vector<Trajectory> load_trajectories_csv(const std::filesystem::path& path);
void save_trajectories_csv(const std::filesystem::path& path,
                           const std::vector<Trajectory>& trajs);

}  // namespace atcline
