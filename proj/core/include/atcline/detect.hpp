#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "atcline/trajectory.hpp"

namespace atcline {

enum class Channel { altitude, speed, heading };

constexpr std::array<Channel, 3> kAllChannels = {Channel::altitude, Channel::speed,
                                                 Channel::heading};

std::string channel_name(Channel c);
Channel channel_from_name(const std::string& name);

struct PlatformSegment {
  Channel channel = Channel::altitude;
  double t_start = 0.0;
  double t_end = 0.0;
  double value = 0.0;  // median of raw member samples
};

struct ManeuverEvent {
  std::string callsign;
  Channel channel = Channel::altitude;
  double onset_t = 0.0;
  double from_value = 0.0;
  double to_value = 0.0;
};

// Per-channel tunable triple (altitude / speed / heading units).
struct ChannelValues {
  double altitude = 0.0;
  double speed = 0.0;
  double heading = 0.0;

  double get(Channel c) const {
    switch (c) {
      case Channel::altitude: return altitude;
      case Channel::speed: return speed;
      default: return heading;
    }
  }
};

struct DetectorConfig {
  int sg_window = 11;  // samples, odd
  int sg_order = 2;
  int win_s = 21;  // sliding stability window, odd
  ChannelValues bin_width{100.0, 5.0, 4.0};
  double stable_mass_frac = 0.7;
  ChannelValues stable_std{50.0, 2.5, 2.0};
  double min_platform_s = 20.0;
  ChannelValues change_threshold{300.0, 8.0, 8.0};
  // Units per second: 200 fpm, 0.5 kt/s, 1 deg/s.
  ChannelValues rate_threshold{200.0 / 60.0, 0.5, 1.0};
  double max_gap_s = 120.0;

  void validate() const;
};

// Raw per-sample values for one channel; heading is unwrapped into a
// continuous signal so circular jumps do not look like maneuvers.
std::vector<double> channel_series(const Trajectory& traj, Channel channel);

// Continuous angle series: out[0] = in[0], successive steps take the
// shortest arc.
std::vector<double> unwrap_heading(const std::vector<double>& hdg);

// Savitzky-Golay smoothing: least-squares polynomial of sg_order over a
// centered sg_window, evaluated at the center; edge samples fit over the
// clipped window. Output length equals input length.
std::vector<double> smooth_channel(const std::vector<double>& samples,
                                   const DetectorConfig& cfg, Channel channel);

// First derivative (units per sample) from the same local polynomial fits.
std::vector<double> sg_derivative(const std::vector<double>& samples,
                                  int window, int order);

std::vector<PlatformSegment> detect_platforms(const Trajectory& traj,
                                              Channel channel,
                                              const DetectorConfig& cfg);

std::vector<ManeuverEvent> extract_maneuvers(const Trajectory& traj,
                                             const DetectorConfig& cfg);

// Continuous-descent-like track: altitude channel has no platform at all.
// These are excluded from downstream datasets.
bool is_cdo_like(const Trajectory& traj, const DetectorConfig& cfg);

void save_events_jsonl(const std::filesystem::path& path,
                       const std::vector<ManeuverEvent>& events);
std::vector<ManeuverEvent> load_events_jsonl(const std::filesystem::path& path);

}  // namespace atcline
