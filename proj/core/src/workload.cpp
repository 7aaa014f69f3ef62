#include "atcline/workload.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <utility>

#include "atcline/errors.hpp"
#include "atcline/util.hpp"

namespace atcline {

const char* interval_source_name(IntervalSource s) {
  return s == IntervalSource::observed ? "observed" : "predicted";
}

CommandInterval reconstruct_timeline(const ManeuverEvent& event,
                                     double offset_hat, double duration_hat) {
  if (!(duration_hat > 0.0) || !std::isfinite(duration_hat))
    throw BadDuration("nonpositive duration_hat for " + event.callsign + ": " +
                      fmt_double(duration_hat));
  if (!std::isfinite(offset_hat))
    throw NonFinite("non-finite offset_hat for " + event.callsign);
  CommandInterval iv;
  iv.callsign = event.callsign;
  iv.end_t = event.onset_t - offset_hat;
  iv.issue_t = iv.end_t - duration_hat;
  iv.source = IntervalSource::predicted;
  return iv;
}

namespace {

void check_intervals(const std::vector<CommandInterval>& intervals,
                     double span_begin, double span_end) {
  if (!std::isfinite(span_begin) || !std::isfinite(span_end) ||
      span_end < span_begin)
    throw OutOfRange("degenerate workload span [" + fmt_double(span_begin) +
                     ", " + fmt_double(span_end) + ")");
  for (const auto& iv : intervals) {
    if (!(iv.end_t > iv.issue_t))
      throw BadDuration("interval for " + iv.callsign +
                        " has nonpositive length");
    if (iv.issue_t < span_begin || iv.end_t > span_end)
      throw OutOfRange("interval for " + iv.callsign +
                       " lies outside the workload span");
  }
}

}  // namespace

WorkloadReport workload_report(const std::vector<CommandInterval>& intervals,
                               double span_begin, double span_end,
                               double window_s) {
  if (!(window_s > 0.0) || !std::isfinite(window_s))
    throw BadWindow("window_s must be positive, got " + fmt_double(window_s));
  check_intervals(intervals, span_begin, span_end);

  WorkloadReport rep;
  rep.window_s = window_s;
  rep.span_begin = span_begin;
  rep.span_end = span_end;
  const auto n_windows = static_cast<std::size_t>(
      std::ceil((span_end - span_begin) / window_s));

  for (std::size_t k = 0; k < n_windows; ++k) {
    const double a = span_begin + static_cast<double>(k) * window_s;
    const double b = a + window_s;
    WindowStats w;
    w.start_t = a;

    // (time, delta) endpoint events of the clipped intervals; an end sorts
    // before a start at the same instant, so touching commands never overlap.
    std::vector<std::pair<double, int>> events;
    std::vector<double> issues;
    for (const auto& iv : intervals) {
      const double lo = std::max(iv.issue_t, a);
      const double hi = std::min(iv.end_t, b);
      if (hi > lo) {
        w.cumulative_speech_s += hi - lo;
        events.emplace_back(lo, +1);
        events.emplace_back(hi, -1);
      }
      if (iv.issue_t >= a && iv.issue_t < b) {
        w.command_count += 1;
        issues.push_back(iv.issue_t);
      }
    }

    std::sort(events.begin(), events.end());
    int open = 0;
    for (const auto& [t, delta] : events) {
      open += delta;
      w.max_concurrency = std::max(w.max_concurrency, open);
    }

    if (issues.size() >= 2) {
      std::sort(issues.begin(), issues.end());
      double gap = 0.0;
      for (std::size_t i = 1; i < issues.size(); ++i)
        gap += issues[i] - issues[i - 1];
      w.mean_gap_s = gap / static_cast<double>(issues.size() - 1);
    }
    rep.windows.push_back(std::move(w));
  }
  return rep;
}

nlohmann::ordered_json workload_json(const WorkloadReport& rep) {
  nlohmann::ordered_json j;
  j["window_s"] = rep.window_s;
  j["span"] = {{"begin", rep.span_begin}, {"end", rep.span_end}};
  j["windows"] = nlohmann::ordered_json::array();
  for (const auto& w : rep.windows) {
    nlohmann::ordered_json wj;
    wj["start_t"] = w.start_t;
    wj["cumulative_speech_s"] = w.cumulative_speech_s;
    wj["max_concurrency"] = w.max_concurrency;
    wj["command_count"] = w.command_count;
    if (w.mean_gap_s)
      wj["mean_gap_s"] = *w.mean_gap_s;
    else
      wj["mean_gap_s"] = nullptr;
    j["windows"].push_back(std::move(wj));
  }
  return j;
}

std::string workload_csv(const WorkloadReport& rep) {
  std::string out =
      "window_start,cumulative_speech_s,max_concurrency,command_count,"
      "mean_gap_s\n";
  for (const auto& w : rep.windows) {
    out += fmt_double(w.start_t);
    out += ',';
    out += fmt_double(w.cumulative_speech_s);
    out += ',';
    out += std::to_string(w.max_concurrency);
    out += ',';
    out += std::to_string(w.command_count);
    out += ',';
    if (w.mean_gap_s) out += fmt_double(*w.mean_gap_s);
    out += '\n';
  }
  return out;
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (const char c : s) {
    if (c == '&')
      out += "&amp;";
    else if (c == '<')
      out += "&lt;";
    else if (c == '>')
      out += "&gt;";
    else
      out += c;
  }
  return out;
}

std::string fmt_axis(double t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.0f", t);
  return buf;
}

}  // namespace

std::string timeline_svg(const std::vector<CommandInterval>& intervals,
                         double span_begin, double span_end) {
  if (!(span_end > span_begin))
    throw OutOfRange("timeline span must have positive length");
  check_intervals(intervals, span_begin, span_end);

  // Lanes in order of first command; ties broken by callsign for stability.
  std::vector<CommandInterval> sorted = intervals;
  std::sort(sorted.begin(), sorted.end(),
            [](const CommandInterval& x, const CommandInterval& y) {
              if (x.issue_t != y.issue_t) return x.issue_t < y.issue_t;
              if (x.callsign != y.callsign) return x.callsign < y.callsign;
              return x.end_t < y.end_t;
            });
  std::map<std::string, std::size_t> lane;
  std::vector<std::string> lane_names;
  for (const auto& iv : sorted)
    if (lane.emplace(iv.callsign, lane_names.size()).second)
      lane_names.push_back(iv.callsign);

  constexpr double kLeft = 90.0, kRight = 20.0, kTop = 28.0, kBottom = 24.0;
  constexpr double kRowH = 24.0, kBarH = 14.0, kWidth = 960.0;
  const double plot_w = kWidth - kLeft - kRight;
  const double height =
      kTop + kRowH * static_cast<double>(lane_names.size()) + kBottom;
  const auto x_of = [&](double t) {
    return kLeft + (t - span_begin) / (span_end - span_begin) * plot_w;
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         fmt_double(kWidth) + "\" height=\"" + fmt_double(height) +
         "\" viewBox=\"0 0 " + fmt_double(kWidth) + " " + fmt_double(height) +
         "\">\n";
  svg +=
      "<style>text{font:11px sans-serif;fill:#333}.lane{stroke:#ddd}"
      ".observed{fill:#49739c}.predicted{fill:#c97b3d}</style>\n";

  // Time axis with six even ticks.
  svg += "<line class=\"lane\" x1=\"" + fmt_double(kLeft) + "\" y1=\"" +
         fmt_double(kTop - 6.0) + "\" x2=\"" + fmt_double(kWidth - kRight) +
         "\" y2=\"" + fmt_double(kTop - 6.0) + "\"/>\n";
  for (int i = 0; i <= 6; ++i) {
    const double t =
        span_begin + (span_end - span_begin) * static_cast<double>(i) / 6.0;
    svg += "<text x=\"" + fmt_double(x_of(t)) + "\" y=\"" +
           fmt_double(kTop - 10.0) + "\" text-anchor=\"middle\">" +
           fmt_axis(t) + "</text>\n";
  }

  for (std::size_t i = 0; i < lane_names.size(); ++i) {
    const double y = kTop + kRowH * static_cast<double>(i);
    svg += "<line class=\"lane\" x1=\"" + fmt_double(kLeft) + "\" y1=\"" +
           fmt_double(y + kRowH) + "\" x2=\"" + fmt_double(kWidth - kRight) +
           "\" y2=\"" + fmt_double(y + kRowH) + "\"/>\n";
    svg += "<text x=\"" + fmt_double(kLeft - 8.0) + "\" y=\"" +
           fmt_double(y + kRowH / 2.0 + 4.0) + "\" text-anchor=\"end\">" +
           xml_escape(lane_names[i]) + "</text>\n";
  }

  for (const auto& iv : sorted) {
    const double y = kTop + kRowH * static_cast<double>(lane.at(iv.callsign)) +
                     (kRowH - kBarH) / 2.0;
    svg += "<rect class=\"" + std::string(interval_source_name(iv.source)) +
           "\" x=\"" + fmt_double(x_of(iv.issue_t)) + "\" y=\"" +
           fmt_double(y) + "\" width=\"" +
           fmt_double(x_of(iv.end_t) - x_of(iv.issue_t)) + "\" height=\"" +
           fmt_double(kBarH) + "\"><title>" + xml_escape(iv.callsign) + " " +
           fmt_double(iv.issue_t) + "-" + fmt_double(iv.end_t) +
           "s</title></rect>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace atcline
