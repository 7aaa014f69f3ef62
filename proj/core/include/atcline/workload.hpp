#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "atcline/detect.hpp"

// Command-timeline reconstruction from lifecycle predictions and tumbling-
// window workload aggregation over the reconstructed speech intervals.
namespace atcline {

enum class IntervalSource { observed, predicted };

const char* interval_source_name(IntervalSource s);

// One spoken command on the frequency: issued at issue_t, audible until
// end_t. Always end_t > issue_t.
struct CommandInterval {
  std::string callsign;
  double issue_t = 0.0;
  double end_t = 0.0;
  IntervalSource source = IntervalSource::predicted;

  double length_s() const { return end_t - issue_t; }
};

// Inverts the lifecycle bookkeeping: the command ended offset_hat seconds
// before the maneuver onset (negative offset_hat means the aircraft moved
// first) and was spoken for duration_hat seconds before that.
CommandInterval reconstruct_timeline(const ManeuverEvent& event,
                                     double offset_hat, double duration_hat);

struct WindowStats {
  double start_t = 0.0;  // window covers [start_t, start_t + window_s)
  double cumulative_speech_s = 0.0;
  int max_concurrency = 0;
  int command_count = 0;                // intervals issued in the window
  std::optional<double> mean_gap_s;     // absent with fewer than two issues
};

struct WorkloadReport {
  double window_s = 0.0;
  double span_begin = 0.0;
  double span_end = 0.0;
  std::vector<WindowStats> windows;
};

// Tumbling half-open windows [begin + k*w, begin + (k+1)*w) tile the span, so
// boundary instants land in exactly one window and speech time is never
// double counted. Speech is clipped to the window; concurrency is the peak
// number of simultaneously open intervals inside it, where a command starting
// at the instant another ends does not overlap it; the gap is the mean of
// consecutive issue-time differences among commands issued in the window.
// Every interval must lie inside the span.
WorkloadReport workload_report(const std::vector<CommandInterval>& intervals,
                               double span_begin, double span_end,
                               double window_s);

nlohmann::ordered_json workload_json(const WorkloadReport& rep);

// Header `window_start,cumulative_speech_s,max_concurrency,command_count,
// mean_gap_s`; an absent gap leaves its field empty.
std::string workload_csv(const WorkloadReport& rep);

// Standalone SVG: one lane per callsign, one bar per command spanning
// [issue_t, end_t], observed and predicted bars in distinct fills.
std::string timeline_svg(const std::vector<CommandInterval>& intervals,
                         double span_begin, double span_end);

}  // namespace atcline
