#include "atcline/align.hpp"

#include <algorithm>
#include <cmath>

namespace atcline {

void AlignmentConfig::validate() const {
  if (window_before_s < 0.0 || window_after_s < 0.0)
    throw BadConfig("alignment windows must be nonnegative");
}

AlignmentResult align(const std::vector<ParsedCommand>& cmds,
                      const std::vector<ManeuverEvent>& events,
                      const AlignmentConfig& cfg) {
  cfg.validate();

  struct Candidate {
    std::size_t cmd_i, event_i;
    double offset;
  };
  std::vector<Candidate> candidates;
  for (std::size_t ci = 0; ci < cmds.size(); ++ci) {
    const auto& cmd = cmds[ci];
    const double end = cmd.end_t();
    for (std::size_t ei = 0; ei < events.size(); ++ei) {
      const auto& ev = events[ei];
      if (ev.callsign != cmd.callsign) continue;
      if (cfg.require_type_match && ev.channel != cmd.ctype) continue;
      const double offset = ev.onset_t - end;
      if (offset < -cfg.window_before_s || offset > cfg.window_after_s) continue;
      candidates.push_back({ci, ei, offset});
    }
  }
  // Smallest absolute gap first; remaining fields break ties deterministically.
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](const Candidate& a, const Candidate& b) {
                     const double ga = std::fabs(a.offset), gb = std::fabs(b.offset);
                     if (ga != gb) return ga < gb;
                     if (cmds[a.cmd_i].start_t != cmds[b.cmd_i].start_t)
                       return cmds[a.cmd_i].start_t < cmds[b.cmd_i].start_t;
                     return events[a.event_i].onset_t < events[b.event_i].onset_t;
                   });

  std::vector<bool> cmd_used(cmds.size(), false), event_used(events.size(), false);
  AlignmentResult res;
  for (const auto& c : candidates) {
    if (cmd_used[c.cmd_i] || event_used[c.event_i]) continue;
    cmd_used[c.cmd_i] = true;
    event_used[c.event_i] = true;
    res.pairs.push_back({cmds[c.cmd_i], events[c.event_i], c.offset});
  }
  std::stable_sort(res.pairs.begin(), res.pairs.end(),
                   [](const AlignedPair& a, const AlignedPair& b) {
                     if (a.cmd.start_t != b.cmd.start_t)
                       return a.cmd.start_t < b.cmd.start_t;
                     return a.cmd.callsign < b.cmd.callsign;
                   });
  for (std::size_t i = 0; i < cmds.size(); ++i)
    if (!cmd_used[i]) res.unmatched_commands.push_back(cmds[i]);
  for (std::size_t i = 0; i < events.size(); ++i)
    if (!event_used[i]) res.unmatched_events.push_back(events[i]);
  return res;
}

}  // namespace atcline
