#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "atcline/detect.hpp"
#include "atcline/features.hpp"
#include "atcline/phrase.hpp"
#include "atcline/trajectory.hpp"

// Seeded scenario generator: piecewise platform/transition trajectories with
// canonical-phraseology transcripts placed so that maneuver onset equals
// command end plus a sampled offset. Ground truth carries every planted
// quantity, making the generator the oracle for the rest of the pipeline.
namespace atcline {

struct ScenarioConfig {
  int n_flights = 10;
  int min_maneuvers = 2;
  int max_maneuvers = 4;
  ChannelValues noise_sigma{25.0, 1.5, 1.0};  // ft / kt / deg

  // Offset from command end to maneuver onset: truncated normal, lower bound
  // only. Speed commands start speed_offset_bonus_s later on average; the
  // other types are shifted down so the marginal mean stays offset_mean_s.
  double offset_mean_s = 12.0;
  double offset_sigma_s = 5.0;
  double offset_min_s = -5.0;
  double speed_offset_bonus_s = 4.0;

  // Spoken durations: per-type means whose uniform mixture is ~N(3.5, 1).
  double duration_mean_altitude_s = 4.3;
  double duration_mean_speed_s = 3.5;
  double duration_mean_heading_s = 2.7;
  double duration_sigma_s = 0.75;
  double duration_min_s = 1.0;
  double duration_max_s = 8.0;

  ChannelValues transition_rate{25.0, 1.0, 3.0};  // ft/s, kt/s, deg/s
  double platform_min_s = 100.0;
  double platform_max_s = 160.0;

  double t0 = 30000.0;          // scenario epoch, seconds into the day
  double start_stagger_s = 37.0;  // flight i departs at t0 + i * stagger
  bool pilot_readbacks = true;
  bool chatter = true;  // non-command radio traffic
  std::uint64_t seed = 0;

  void validate() const;
};

struct TruthPlatform {
  std::string callsign;
  Channel channel = Channel::altitude;
  double t_start = 0.0;
  double t_end = 0.0;
  double value = 0.0;
};

struct TruthEvent {
  std::string callsign;
  Channel channel = Channel::altitude;
  double onset_t = 0.0;
  double from_value = 0.0;
  double to_value = 0.0;
  ParsedCommand cmd;      // planted command with true timing
  double offset_s = 0.0;  // onset_t - cmd.end_t()
};

struct GroundTruth {
  std::vector<TruthPlatform> platforms;
  std::vector<TruthEvent> events;
};

struct Scenario {
  std::vector<Trajectory> trajs;
  std::vector<TranscriptUtterance> transcript;  // sorted by start_t
  std::vector<WeatherRecord> weather;
  std::vector<std::pair<std::string, char>> wtc;  // airline prefix -> class
  GroundTruth truth;
};

Scenario generate_scenario(const ScenarioConfig& cfg);

// Writes tracks.csv, transcript.tsv, truth.jsonl, aliases.csv, actypes.csv,
// weather.csv: the exact formats the ingestion side reads.
void save_scenario(const std::filesystem::path& dir, const Scenario& sc);

void save_truth_jsonl(const std::filesystem::path& path, const GroundTruth& truth);
GroundTruth load_truth_jsonl(const std::filesystem::path& path);

}  // namespace atcline
