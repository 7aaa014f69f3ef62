#include "atcline/detect.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "atcline/io.hpp"
#include "atcline/util.hpp"

namespace atcline {

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Least-squares polynomial fit over samples[lo, hi] with x = index - center.
// Returns coefficients a[0..deg]; a[0] is the value at the center, a[1] the
// slope per sample. Degree is clipped to the number of points minus one.
std::vector<double> polyfit_at(const std::vector<double>& samples, int lo, int hi,
                               int center, int deg) {
  const int npts = hi - lo + 1;
  if (deg > npts - 1) deg = npts - 1;
  const int m = deg + 1;
  std::vector<double> mat(static_cast<std::size_t>(m) * m, 0.0);
  std::vector<double> rhs(m, 0.0);
  for (int j = lo; j <= hi; ++j) {
    const double x = j - center;
    double xp = 1.0;
    std::vector<double> powers(2 * m - 1);
    for (int p = 0; p < 2 * m - 1; ++p) {
      powers[p] = xp;
      xp *= x;
    }
    for (int r = 0; r < m; ++r) {
      for (int c = 0; c < m; ++c) mat[r * m + c] += powers[r + c];
      rhs[r] += powers[r] * samples[j];
    }
  }
  // Gaussian elimination with partial pivoting; the system is tiny.
  for (int col = 0; col < m; ++col) {
    int pivot = col;
    for (int r = col + 1; r < m; ++r)
      if (std::fabs(mat[r * m + col]) > std::fabs(mat[pivot * m + col])) pivot = r;
    if (pivot != col) {
      for (int c = 0; c < m; ++c) std::swap(mat[col * m + c], mat[pivot * m + c]);
      std::swap(rhs[col], rhs[pivot]);
    }
    const double d = mat[col * m + col];
    for (int r = col + 1; r < m; ++r) {
      const double f = mat[r * m + col] / d;
      for (int c = col; c < m; ++c) mat[r * m + c] -= f * mat[col * m + c];
      rhs[r] -= f * rhs[col];
    }
  }
  std::vector<double> a(m, 0.0);
  for (int r = m - 1; r >= 0; --r) {
    double s = rhs[r];
    for (int c = r + 1; c < m; ++c) s -= mat[r * m + c] * a[c];
    a[r] = s / mat[r * m + r];
  }
  a.resize(deg + 1);
  return a;
}

std::vector<double> sg_fit(const std::vector<double>& samples, int window,
                           int order, int coefficient) {
  const int n = static_cast<int>(samples.size());
  const int h = window / 2;
  std::vector<double> out(samples.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - h);
    const int hi = std::min(n - 1, i + h);
    const auto a = polyfit_at(samples, lo, hi, i, order);
    out[i] = coefficient < static_cast<int>(a.size()) ? a[coefficient] : 0.0;
  }
  return out;
}

}  // namespace

std::string channel_name(Channel c) {
  switch (c) {
    case Channel::altitude: return "altitude";
    case Channel::speed: return "speed";
    default: return "heading";
  }
}

Channel channel_from_name(const std::string& name) {
  if (name == "altitude") return Channel::altitude;
  if (name == "speed") return Channel::speed;
  if (name == "heading") return Channel::heading;
  throw BadConfig("unknown channel: " + name);
}

void DetectorConfig::validate() const {
  if (sg_window % 2 == 0 || sg_window <= sg_order || sg_order < 0)
    throw BadConfig("sg_window must be odd and exceed sg_order");
  if (win_s % 2 == 0 || win_s < 3) throw BadConfig("win_s must be odd and >= 3");
  if (!(stable_mass_frac > 0.0 && stable_mass_frac <= 1.0))
    throw BadConfig("stable_mass_frac must be in (0, 1]");
  if (min_platform_s < 0.0 || max_gap_s <= 0.0)
    throw BadConfig("negative platform/gap durations");
}

std::vector<double> unwrap_heading(const std::vector<double>& hdg) {
  std::vector<double> out(hdg.size());
  if (hdg.empty()) return out;
  out[0] = hdg[0];
  for (std::size_t i = 1; i < hdg.size(); ++i)
    out[i] = out[i - 1] + heading_diff(hdg[i], hdg[i - 1]);
  return out;
}

std::vector<double> channel_series(const Trajectory& traj, Channel channel) {
  std::vector<double> out;
  out.reserve(traj.points.size());
  for (const auto& p : traj.points) {
    switch (channel) {
      case Channel::altitude: out.push_back(p.alt); break;
      case Channel::speed: out.push_back(p.gs); break;
      case Channel::heading: out.push_back(p.hdg); break;
    }
  }
  if (channel == Channel::heading) out = unwrap_heading(out);
  return out;
}

std::vector<double> smooth_channel(const std::vector<double>& samples,
                                   const DetectorConfig& cfg, Channel) {
  cfg.validate();
  if (static_cast<int>(samples.size()) < cfg.sg_window)
    throw SignalTooShort("series shorter than sg_window");
  return sg_fit(samples, cfg.sg_window, cfg.sg_order, 0);
}

std::vector<double> sg_derivative(const std::vector<double>& samples, int window,
                                  int order) {
  if (static_cast<int>(samples.size()) < window)
    throw SignalTooShort("series shorter than sg_window");
  return sg_fit(samples, window, order, 1);
}

std::vector<PlatformSegment> detect_platforms(const Trajectory& traj,
                                              Channel channel,
                                              const DetectorConfig& cfg) {
  cfg.validate();
  if (!is_uniform_1hz(traj))
    throw IrregularSampling("detector requires 1 Hz resampled input: " +
                            traj.callsign);
  const auto raw = channel_series(traj, channel);
  const auto smoothed = smooth_channel(raw, cfg, channel);
  const int n = static_cast<int>(smoothed.size());
  const int h = cfg.win_s / 2;
  const double bin_width = cfg.bin_width.get(channel);
  const double max_std = cfg.stable_std.get(channel);

  // A sample is stable when the full window centered on it passes both the
  // histogram concentration gate and the dispersion gate. Attribution to the
  // center keeps platform edges from spilling into transitions.
  std::vector<bool> stable(smoothed.size(), false);
  std::vector<double> window(cfg.win_s);
  for (int c = h; c < n - h; ++c) {
    double sum = 0.0;
    for (int j = 0; j < cfg.win_s; ++j) {
      window[j] = smoothed[c - h + j];
      sum += window[j];
    }
    const double mean = sum / cfg.win_s;
    double var = 0.0;
    for (const double x : window) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / cfg.win_s);
    if (sd > max_std) continue;

    const double med = median_of(window);
    std::map<long long, int> counts;
    int best = 0;
    for (const double x : window) {
      const long long bin =
          static_cast<long long>(std::floor((x - med) / bin_width + 0.5));
      best = std::max(best, ++counts[bin]);
    }
    if (static_cast<double>(best) / cfg.win_s >= cfg.stable_mass_frac)
      stable[static_cast<std::size_t>(c)] = true;
  }

  std::vector<PlatformSegment> out;
  int run_start = -1;
  for (int i = 0; i <= n; ++i) {
    const bool s = i < n && stable[static_cast<std::size_t>(i)];
    if (s && run_start < 0) run_start = i;
    if (!s && run_start >= 0) {
      const int run_end = i - 1;
      const double t0 = traj.points[static_cast<std::size_t>(run_start)].t;
      const double t1 = traj.points[static_cast<std::size_t>(run_end)].t;
      if (t1 - t0 >= cfg.min_platform_s) {
        std::vector<double> members(raw.begin() + run_start,
                                    raw.begin() + run_end + 1);
        double value = median_of(std::move(members));
        if (channel == Channel::heading) value = wrap360(value);
        out.push_back({channel, t0, t1, value});
      }
      run_start = -1;
    }
  }
  return out;
}

std::vector<ManeuverEvent> extract_maneuvers(const Trajectory& traj,
                                             const DetectorConfig& cfg) {
  std::vector<ManeuverEvent> events;
  for (const Channel channel : kAllChannels) {
    const auto platforms = detect_platforms(traj, channel, cfg);
    if (platforms.size() < 2) continue;
    const auto raw = channel_series(traj, channel);
    const auto deriv = sg_derivative(raw, cfg.sg_window, cfg.sg_order);
    const double t0 = traj.points.front().t;
    const double rate = cfg.rate_threshold.get(channel);

    for (std::size_t k = 0; k + 1 < platforms.size(); ++k) {
      const auto& prev = platforms[k];
      const auto& next = platforms[k + 1];
      const double gap = channel == Channel::heading
                             ? std::fabs(heading_diff(next.value, prev.value))
                             : std::fabs(next.value - prev.value);
      if (gap < cfg.change_threshold.get(channel)) continue;
      if (next.t_start - prev.t_end > cfg.max_gap_s) continue;

      double onset = prev.t_end;
      const int lo = static_cast<int>(prev.t_end - t0) + 1;
      const int hi = static_cast<int>(next.t_start - t0) - 1;
      for (int i = lo; i <= hi; ++i) {
        if (std::fabs(deriv[static_cast<std::size_t>(i)]) >= rate) {
          onset = traj.points[static_cast<std::size_t>(i)].t;
          break;
        }
      }
      events.push_back({traj.callsign, channel, onset, prev.value, next.value});
    }
  }
  std::sort(events.begin(), events.end(),
            [](const ManeuverEvent& a, const ManeuverEvent& b) {
              if (a.onset_t != b.onset_t) return a.onset_t < b.onset_t;
              return static_cast<int>(a.channel) < static_cast<int>(b.channel);
            });
  return events;
}

bool is_cdo_like(const Trajectory& traj, const DetectorConfig& cfg) {
  return detect_platforms(traj, Channel::altitude, cfg).empty();
}

void save_events_jsonl(const std::filesystem::path& path,
                       const std::vector<ManeuverEvent>& events) {
  std::string buf;
  for (const auto& e : events) {
    nlohmann::ordered_json j;
    j["callsign"] = e.callsign;
    j["channel"] = channel_name(e.channel);
    j["onset_t"] = e.onset_t;
    j["from_value"] = e.from_value;
    j["to_value"] = e.to_value;
    buf += j.dump();
    buf += '\n';
  }
  write_text_file(path, buf);
}

std::vector<ManeuverEvent> load_events_jsonl(const std::filesystem::path& path) {
  std::vector<ManeuverEvent> out;
  for (const auto& line : read_lines(path)) {
    if (trim(line).empty()) continue;
    const auto j = nlohmann::json::parse(line);
    ManeuverEvent e;
    e.callsign = j.at("callsign").get<std::string>();
    e.channel = channel_from_name(j.at("channel").get<std::string>());
    e.onset_t = j.at("onset_t").get<double>();
    e.from_value = j.at("from_value").get<double>();
    e.to_value = j.at("to_value").get<double>();
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace atcline
