#include <algorithm>
#include <cmath>
#include <map>

#include <doctest.h>

#include "atcline/detect.hpp"
#include "atcline/rng.hpp"
#include "atcline/util.hpp"

using namespace atcline;

namespace {

Trajectory flat_track(double t0, int n) {
  Trajectory traj;
  traj.callsign = "TST1";
  for (int i = 0; i < n; ++i)
    traj.points.push_back({t0 + i, 1.0 + 1e-4 * i, 103.0, 5000.0, 250.0, 90.0});
  return traj;
}

// Altitude profile: hold `a0` until t_change, ramp at `rate` to `a1`, hold.
Trajectory step_alt_track(double t0, int n, double t_change, double a0, double a1,
                          double rate, double noise_sd, std::uint64_t seed) {
  Rng rng(seed);
  Trajectory traj = flat_track(t0, n);
  for (int i = 0; i < n; ++i) {
    const double t = traj.points[i].t;
    double alt = a0;
    if (t >= t_change) {
      const double ramped = a0 + (a1 > a0 ? 1.0 : -1.0) * rate * (t - t_change);
      alt = a1 > a0 ? std::min(ramped, a1) : std::max(ramped, a1);
    }
    traj.points[i].alt = alt + (noise_sd > 0.0 ? rng.normal(0.0, noise_sd) : 0.0);
  }
  return traj;
}

// Brute-force max-bin mass fraction for a window, bins centered on its median.
double window_max_bin_fraction(const std::vector<double>& s, int lo, int win,
                               double bw) {
  std::vector<double> w(s.begin() + lo, s.begin() + lo + win);
  std::vector<double> sorted = w;
  std::sort(sorted.begin(), sorted.end());
  const double med = 0.5 * (sorted[(win - 1) / 2] + sorted[win / 2]);
  std::map<long long, int> counts;
  int best = 0;
  for (const double x : w) {
    const long long bin = static_cast<long long>(std::floor((x - med) / bw + 0.5));
    best = std::max(best, ++counts[bin]);
  }
  return static_cast<double>(best) / win;
}

}  // namespace

TEST_CASE("savitzky-golay reproduces constants and lines exactly") {
  DetectorConfig cfg;
  const std::vector<double> constant(60, 5000.0);
  const auto sc = smooth_channel(constant, cfg, Channel::altitude);
  for (const double v : sc) CHECK(v == doctest::Approx(5000.0).epsilon(1e-12));

  std::vector<double> line(60);
  for (int i = 0; i < 60; ++i) line[i] = 1000.0 + 10.0 * i;
  const auto sl = smooth_channel(line, cfg, Channel::altitude);
  for (int i = 0; i < 60; ++i) CHECK(std::fabs(sl[i] - line[i]) < 1e-6);

  const auto dl = sg_derivative(line, cfg.sg_window, cfg.sg_order);
  for (int i = 0; i < 60; ++i) CHECK(dl[i] == doctest::Approx(10.0).epsilon(1e-9));
}

TEST_CASE("savitzky-golay attenuates noise around a line") {
  Rng rng(99);
  const int n = 400;
  std::vector<double> clean(n), noisy(n);
  for (int i = 0; i < n; ++i) {
    clean[i] = 1000.0 + 10.0 * i;
    noisy[i] = clean[i] + rng.normal(0.0, 25.0);
  }
  DetectorConfig cfg;
  const auto smoothed = smooth_channel(noisy, cfg, Channel::altitude);
  double rms_in = 0.0, rms_out = 0.0;
  for (int i = 0; i < n; ++i) {
    rms_in += (noisy[i] - clean[i]) * (noisy[i] - clean[i]);
    rms_out += (smoothed[i] - clean[i]) * (smoothed[i] - clean[i]);
  }
  CHECK(std::sqrt(rms_out / n) < std::sqrt(rms_in / n));
}

TEST_CASE("smoothing rejects series shorter than the window") {
  DetectorConfig cfg;
  CHECK_THROWS_AS(smooth_channel(std::vector<double>(5, 1.0), cfg, Channel::speed),
                  SignalTooShort);
}

TEST_CASE("constant noisy segment yields one platform near truth") {
  DetectorConfig cfg;
  auto traj = flat_track(0.0, 120);
  Rng rng(7);
  for (auto& p : traj.points) p.alt = 5000.0 + rng.normal(0.0, 25.0);
  const auto platforms = detect_platforms(traj, Channel::altitude, cfg);
  REQUIRE(platforms.size() == 1);
  CHECK(std::fabs(platforms[0].value - 5000.0) <= 30.0);
  CHECK(platforms[0].t_end - platforms[0].t_start >= cfg.min_platform_s);
}

TEST_CASE("monotone descent yields no platforms") {
  DetectorConfig cfg;
  auto traj = flat_track(0.0, 120);
  for (int i = 0; i < 120; ++i) traj.points[i].alt = 8000.0 - 25.0 * i;

  // Independent check: every window's max-bin mass stays below the gate.
  const auto series = channel_series(traj, Channel::altitude);
  for (int lo = 0; lo + cfg.win_s <= 120; ++lo)
    CHECK(window_max_bin_fraction(series, lo, cfg.win_s,
                                  cfg.bin_width.altitude) < cfg.stable_mass_frac);

  CHECK(detect_platforms(traj, Channel::altitude, cfg).empty());
}

TEST_CASE("same-value halves merge into a single platform") {
  DetectorConfig cfg;
  const auto traj = flat_track(0.0, 80);
  const auto platforms = detect_platforms(traj, Channel::altitude, cfg);
  REQUIRE(platforms.size() == 1);
  CHECK(platforms[0].value == 5000.0);
}

TEST_CASE("platforms never overlap and stay inside the span") {
  DetectorConfig cfg;
  const auto traj =
      step_alt_track(0.0, 400, 200.0, 5000.0, 3000.0, 25.0, 25.0, 21);
  for (const Channel ch : kAllChannels) {
    const auto platforms = detect_platforms(traj, ch, cfg);
    for (std::size_t i = 0; i < platforms.size(); ++i) {
      CHECK(platforms[i].t_start >= traj.start_t());
      CHECK(platforms[i].t_end <= traj.end_t());
      CHECK(platforms[i].t_start < platforms[i].t_end);
      if (i > 0) CHECK(platforms[i].t_start > platforms[i - 1].t_end);
    }
  }
}

TEST_CASE("single descent produces one altitude event near the true onset") {
  DetectorConfig cfg;
  const auto traj =
      step_alt_track(0.0, 400, 200.0, 5000.0, 3000.0, 25.0, 25.0, 5);
  const auto events = extract_maneuvers(traj, cfg);
  REQUIRE(events.size() == 1);
  CHECK(events[0].channel == Channel::altitude);
  CHECK(events[0].callsign == "TST1");
  CHECK(std::fabs(events[0].onset_t - 200.0) <= 3.0);
  CHECK(std::fabs(events[0].from_value - 5000.0) <= 30.0);
  CHECK(std::fabs(events[0].to_value - 3000.0) <= 30.0);
}

TEST_CASE("pure platform trajectory has no events") {
  DetectorConfig cfg;
  const auto events = extract_maneuvers(flat_track(0.0, 300), cfg);
  CHECK(events.empty());
}

TEST_CASE("heading turn through north uses the circular gap") {
  DetectorConfig cfg;
  auto traj = flat_track(0.0, 300);
  Rng rng(3);
  for (int i = 0; i < 300; ++i) {
    double hdg = 350.0;
    if (i >= 150) hdg = std::min(350.0 + 3.0 * (i - 150), 370.0);
    traj.points[i].hdg = wrap360(hdg + rng.normal(0.0, 1.0));
  }
  const auto events = extract_maneuvers(traj, cfg);
  REQUIRE(events.size() == 1);
  CHECK(events[0].channel == Channel::heading);
  const double gap = std::fabs(heading_diff(events[0].to_value, events[0].from_value));
  CHECK(gap == doctest::Approx(20.0).epsilon(0.15));
  CHECK(std::fabs(events[0].from_value - 350.0) < 2.0);
  CHECK(std::fabs(events[0].to_value - 10.0) < 2.0);
}

TEST_CASE("onset lies strictly between the bounding platforms") {
  DetectorConfig cfg;
  const auto traj =
      step_alt_track(0.0, 400, 200.0, 5000.0, 3000.0, 25.0, 25.0, 11);
  const auto platforms = detect_platforms(traj, Channel::altitude, cfg);
  REQUIRE(platforms.size() == 2);
  const auto events = extract_maneuvers(traj, cfg);
  REQUIRE(events.size() == 1);
  CHECK(events[0].onset_t > platforms[0].t_end);
  CHECK(events[0].onset_t < platforms[1].t_start);
}

TEST_CASE("detection is translation-equivariant in time") {
  DetectorConfig cfg;
  const double shift = 7200.0;
  const auto base =
      step_alt_track(0.0, 400, 200.0, 5000.0, 3000.0, 25.0, 25.0, 17);
  auto moved = base;
  for (auto& p : moved.points) p.t += shift;

  const auto pa = detect_platforms(base, Channel::altitude, cfg);
  const auto pb = detect_platforms(moved, Channel::altitude, cfg);
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pb[i].t_start == pa[i].t_start + shift);
    CHECK(pb[i].t_end == pa[i].t_end + shift);
    CHECK(pb[i].value == pa[i].value);
  }
  const auto ea = extract_maneuvers(base, cfg);
  const auto eb = extract_maneuvers(moved, cfg);
  REQUIRE(ea.size() == eb.size());
  for (std::size_t i = 0; i < ea.size(); ++i) {
    CHECK(eb[i].onset_t == ea[i].onset_t + shift);
    CHECK(eb[i].from_value == ea[i].from_value);
    CHECK(eb[i].to_value == ea[i].to_value);
  }
}

TEST_CASE("detection rejects irregular sampling") {
  DetectorConfig cfg;
  auto traj = flat_track(0.0, 100);
  traj.points[50].t += 0.5;
  CHECK_THROWS_AS(detect_platforms(traj, Channel::altitude, cfg),
                  IrregularSampling);
}

TEST_CASE("events survive a jsonl round-trip") {
  const auto dir = std::filesystem::temp_directory_path() / "atcline_events_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "events.jsonl";
  const std::vector<ManeuverEvent> events{
      {"BAW123", Channel::altitude, 1200.0, 5000.0, 3000.0},
      {"QFA1", Channel::speed, 1300.5, 250.0, 210.0},
      {"SIA256", Channel::heading, 1400.0, 350.0, 10.0},
  };
  save_events_jsonl(path, events);
  const auto loaded = load_events_jsonl(path);
  REQUIRE(loaded.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(loaded[i].callsign == events[i].callsign);
    CHECK(loaded[i].channel == events[i].channel);
    CHECK(loaded[i].onset_t == events[i].onset_t);
    CHECK(loaded[i].from_value == events[i].from_value);
    CHECK(loaded[i].to_value == events[i].to_value);
  }
  std::filesystem::remove_all(dir);
}
