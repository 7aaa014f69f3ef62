#include "atcline/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "atcline/io.hpp"
#include "atcline/util.hpp"

namespace atcline {

namespace {

void validate_point(const TrackPoint& p, const std::string& callsign) {
  const std::string where = " (callsign " + callsign + ", t=" + fmt_double(p.t) + ")";
  if (!(p.lat >= -90.0 && p.lat <= 90.0) || !(p.lon >= -180.0 && p.lon <= 180.0))
    throw BadCoordinate("lat/lon out of range" + where);
  if (!(p.alt >= -1000.0)) throw OutOfRange("altitude below -1000 ft" + where);
  if (!(p.gs >= 0.0)) throw OutOfRange("negative ground speed" + where);
  if (!(p.hdg >= 0.0 && p.hdg < 360.0))
    throw OutOfRange("heading outside [0,360)" + where);
}

double lerp(double a, double b, double f) { return a + (b - a) * f; }

double lerp_heading(double a, double b, double f) {
  return wrap360(a + heading_diff(b, a) * f);
}

TrackPoint interpolate(const TrackPoint& a, const TrackPoint& b, double t) {
  const double f = (t - a.t) / (b.t - a.t);
  TrackPoint p;
  p.t = t;
  p.lat = lerp(a.lat, b.lat, f);
  p.lon = lerp(a.lon, b.lon, f);
  p.alt = lerp(a.alt, b.alt, f);
  p.gs = lerp(a.gs, b.gs, f);
  p.hdg = lerp_heading(a.hdg, b.hdg, f);
  return p;
}

}  // namespace

void validate_trajectory(const Trajectory& traj) {
  if (traj.points.size() < 2)
    throw SignalTooShort("trajectory needs at least 2 points: " + traj.callsign);
  for (std::size_t i = 0; i < traj.points.size(); ++i) {
    validate_point(traj.points[i], traj.callsign);
    if (i > 0 && !(traj.points[i].t > traj.points[i - 1].t))
      throw IrregularSampling("timestamps not strictly increasing: " + traj.callsign);
  }
}

bool is_uniform_1hz(const Trajectory& traj) {
  if (traj.points.size() < 2) return false;
  for (const auto& p : traj.points)
    if (p.t != std::floor(p.t)) return false;
  for (std::size_t i = 1; i < traj.points.size(); ++i)
    if (traj.points[i].t - traj.points[i - 1].t != 1.0) return false;
  return true;
}

std::vector<Trajectory> resample_1hz(const Trajectory& traj, double max_gap_s) {
  validate_trajectory(traj);
  // Split the raw point list wherever the sampling gap exceeds max_gap_s.
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  std::size_t run_start = 0;
  for (std::size_t i = 1; i < traj.points.size(); ++i) {
    if (traj.points[i].t - traj.points[i - 1].t > max_gap_s) {
      runs.emplace_back(run_start, i);
      run_start = i;
    }
  }
  runs.emplace_back(run_start, traj.points.size());

  std::vector<Trajectory> out;
  for (const auto& [lo, hi] : runs) {
    if (hi - lo < 2) continue;
    const double t0 = std::ceil(traj.points[lo].t);
    const double t1 = std::floor(traj.points[hi - 1].t);
    if (t1 - t0 < 1.0) continue;
    Trajectory seg;
    seg.callsign = traj.callsign;
    std::size_t j = lo;
    for (double t = t0; t <= t1; t += 1.0) {
      while (j + 1 < hi && traj.points[j + 1].t < t) ++j;
      seg.points.push_back(interpolate(traj.points[j], traj.points[j + 1], t));
    }
    out.push_back(std::move(seg));
  }
  return out;
}

AircraftState state_at(const Trajectory& traj, double t) {
  if (traj.points.empty() || !traj.covers(t))
    throw OutOfRange("time " + fmt_double(t) + " outside trajectory span of " +
                     traj.callsign);
  const auto it = std::lower_bound(
      traj.points.begin(), traj.points.end(), t,
      [](const TrackPoint& p, double v) { return p.t < v; });
  TrackPoint p;
  if (it->t == t) {
    p = *it;
  } else {
    p = interpolate(*(it - 1), *it, t);
  }
  return {traj.callsign, p.t, p.lat, p.lon, p.alt, p.gs, p.hdg};
}

std::vector<AircraftState> states_at(const std::vector<Trajectory>& trajs,
                                     double t) {
  std::vector<AircraftState> out;
  for (const auto& traj : trajs)
    if (traj.covers(t)) out.push_back(state_at(traj, t));
  std::sort(out.begin(), out.end(),
            [](const AircraftState& a, const AircraftState& b) {
              return a.callsign < b.callsign;
            });
  return out;
}

std::vector<Trajectory> load_trajectories_csv(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw IoError("empty trajectory file: " + path.string());
  if (trim(lines[0]) != "t,callsign,lat,lon,alt_ft,gs_kt,hdg_deg")
    throw IoError("unexpected trajectory CSV header: " + lines[0]);

  std::map<std::string, Trajectory> by_callsign;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto f = split(lines[i], ',');
    if (f.size() != 7)
      throw IoError("bad trajectory row " + std::to_string(i + 1) + " in " +
                    path.string());
    TrackPoint p;
    p.t = parse_double(trim(f[0]));
    const std::string callsign(trim(f[1]));
    p.lat = parse_double(trim(f[2]));
    p.lon = parse_double(trim(f[3]));
    p.alt = parse_double(trim(f[4]));
    p.gs = parse_double(trim(f[5]));
    p.hdg = parse_double(trim(f[6]));
    auto& traj = by_callsign[callsign];
    traj.callsign = callsign;
    traj.points.push_back(p);
  }

  std::vector<Trajectory> out;
  for (auto& [callsign, traj] : by_callsign) {
    std::stable_sort(traj.points.begin(), traj.points.end(),
                     [](const TrackPoint& a, const TrackPoint& b) { return a.t < b.t; });
    validate_trajectory(traj);
    out.push_back(std::move(traj));
  }
  return out;
}

void save_trajectories_csv(const std::filesystem::path& path,
                           const std::vector<Trajectory>& trajs) {
  std::string buf = "t,callsign,lat,lon,alt_ft,gs_kt,hdg_deg\n";
  for (const auto& traj : trajs) {
    for (const auto& p : traj.points) {
      buf += fmt_double(p.t);
      buf += ',';
      buf += traj.callsign;
      buf += ',';
      buf += fmt_double(p.lat);
      buf += ',';
      buf += fmt_double(p.lon);
      buf += ',';
      buf += fmt_double(p.alt);
      buf += ',';
      buf += fmt_double(p.gs);
      buf += ',';
      buf += fmt_double(p.hdg);
      buf += '\n';
    }
  }
  write_text_file(path, buf);
}

}  // namespace atcline
