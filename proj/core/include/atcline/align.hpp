#pragma once

#include <vector>

#include "atcline/detect.hpp"
#include "atcline/errors.hpp"
#include "atcline/phrase.hpp"

// Matches parsed commands to detected maneuvers by callsign, channel, and
// timing. The offset label is measured from command END: issuance is derived
// as end minus duration downstream, so end is the anchor.
namespace atcline {

struct AlignmentConfig {
  double window_before_s = 15.0;  // allows negative offsets down to -15 s
  double window_after_s = 60.0;
  bool require_type_match = true;

  void validate() const;
};

struct AlignedPair {
  ParsedCommand cmd;
  ManeuverEvent event;
  double time_offset_s = 0.0;  // event.onset_t - cmd.end_t()
};

struct AlignmentResult {
  std::vector<AlignedPair> pairs;
  std::vector<ParsedCommand> unmatched_commands;
  std::vector<ManeuverEvent> unmatched_events;
};

// Greedy smallest-|offset| matching. Every command collects candidate events
// sharing its callsign (and channel when require_type_match) whose onset lies
// in [end - window_before_s, end + window_after_s]; candidate pairs are taken
// in order of increasing |offset|, each command and event used at most once.
AlignmentResult align(const std::vector<ParsedCommand>& cmds,
                      const std::vector<ManeuverEvent>& events,
                      const AlignmentConfig& cfg);

}  // namespace atcline
