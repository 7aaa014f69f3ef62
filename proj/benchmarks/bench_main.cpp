#include <benchmark/benchmark.h>

#include "atcline/detect.hpp"
#include "atcline/rng.hpp"
#include "atcline/util.hpp"

namespace {

atcline::Trajectory make_track(int n) {
  atcline::Rng rng(11);
  atcline::Trajectory traj;
  traj.callsign = "BNC1";
  double alt = 9000.0;
  for (int i = 0; i < n; ++i) {
    if (i > n / 3 && alt > 5000.0) alt -= 20.0;
    traj.points.push_back({static_cast<double>(i), 1.0, 103.0,
                           alt + rng.normal(0.0, 25.0),
                           250.0 + rng.normal(0.0, 1.5),
                           atcline::wrap360(90.0 + rng.normal(0.0, 1.0))});
  }
  return traj;
}

void BM_DetectPlatforms(benchmark::State& state) {
  const auto traj = make_track(static_cast<int>(state.range(0)));
  const atcline::DetectorConfig cfg;
  for (auto _ : state) {
    auto platforms = atcline::detect_platforms(traj, atcline::Channel::altitude, cfg);
    benchmark::DoNotOptimize(platforms);
  }
}
BENCHMARK(BM_DetectPlatforms)->Arg(600)->Arg(2400);

void BM_ExtractManeuvers(benchmark::State& state) {
  const auto traj = make_track(static_cast<int>(state.range(0)));
  const atcline::DetectorConfig cfg;
  for (auto _ : state) {
    auto events = atcline::extract_maneuvers(traj, cfg);
    benchmark::DoNotOptimize(events);
  }
}
BENCHMARK(BM_ExtractManeuvers)->Arg(600)->Arg(2400);

}  // namespace

BENCHMARK_MAIN();
