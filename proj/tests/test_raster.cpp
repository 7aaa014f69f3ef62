#include <cmath>
#include <filesystem>
#include <set>

#include <doctest.h>

#include "atcline/io.hpp"
#include "atcline/raster.hpp"

using namespace atcline;

namespace {

bool is_white(const SceneImage& img, int x, int y) {
  return img.at(x, y, 0) == 1.0f && img.at(x, y, 1) == 1.0f && img.at(x, y, 2) == 1.0f;
}

bool is_blue(const SceneImage& img, int x, int y) {
  return img.at(x, y, 0) == 0.0f && img.at(x, y, 1) == 0.0f && img.at(x, y, 2) == 1.0f;
}

bool is_red(const SceneImage& img, int x, int y) {
  return img.at(x, y, 0) == 1.0f && img.at(x, y, 1) == 0.0f && img.at(x, y, 2) == 0.0f;
}

Trajectory northbound(double lat0, double lon, int n, double deg_per_s) {
  Trajectory traj;
  traj.callsign = "NTH1";
  for (int i = 0; i < n; ++i)
    traj.points.push_back(
        {1000.0 + i, lat0 + deg_per_s * i, lon, 9000.0, 300.0, 0.0});
  return traj;
}

}  // namespace

TEST_CASE("hovering aircraft renders as a centered blue dot on white") {
  RasterConfig cfg;
  Trajectory traj;
  traj.callsign = "HOV1";
  for (int i = 0; i < 130; ++i)
    traj.points.push_back({1000.0 + i, 1.44, 104.0, 2000.0, 0.0, 180.0});
  const auto img = render_history(traj, 1125.0, cfg);

  int blue = 0, other = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      if (is_blue(img, x, y)) ++blue;
      else if (!is_white(img, x, y)) ++other;
    }
  CHECK(other == 0);
  CHECK(blue >= 1);
  CHECK(blue <= 9);  // marker block only
  // Dot at the frame center.
  const int cx = (img.width - 1) / 2;
  const int cy = (img.height - 1) / 2;
  CHECK(is_blue(img, cx, cy));
}

TEST_CASE("northbound track renders a vertical line within one column") {
  RasterConfig cfg;
  const auto traj = northbound(1.2, 104.0, 130, 0.0005);
  const auto img = render_history(traj, 1125.0, cfg);

  std::set<int> columns;
  int rows_lit = 0;
  for (int y = 0; y < img.height; ++y) {
    bool lit = false;
    for (int x = 0; x < img.width; ++x)
      if (is_blue(img, x, y)) {
        columns.insert(x);
        lit = true;
      }
    if (lit) ++rows_lit;
  }
  CHECK(*columns.rbegin() - *columns.begin() <= 2);  // marker adds one px each side
  CHECK(rows_lit > img.height / 2);                   // spans the frame vertically
}

TEST_CASE("history rendering is deterministic") {
  RasterConfig cfg;
  const auto traj = northbound(1.2, 104.0, 130, 0.0004);
  const auto a = render_history(traj, 1125.0, cfg);
  const auto b = render_history(traj, 1125.0, cfg);
  CHECK(a.pixels == b.pixels);
}

TEST_CASE("history is translation-invariant at a matched reference latitude") {
  RasterConfig cfg;
  cfg.ref_lat = 1.3;
  Trajectory traj;
  traj.callsign = "TRN1";
  for (int i = 0; i < 130; ++i)
    traj.points.push_back({1000.0 + i, 1.2 + 0.0003 * i, 104.0 + 0.0002 * i, 9000.0,
                           280.0, 33.0});
  // Power-of-two offsets are exact at these magnitudes, so the projected
  // differences match bit-for-bit and the buffers must be identical.
  auto moved = traj;
  for (auto& p : moved.points) {
    p.lat += 0.25;
    p.lon -= 0.5;
  }
  const auto a = render_history(traj, 1125.0, cfg);
  const auto b = render_history(moved, 1125.0, cfg);
  CHECK(a.pixels == b.pixels);
}

TEST_CASE("history needs at least two points in the window") {
  RasterConfig cfg;
  Trajectory traj;
  traj.callsign = "SGL1";
  traj.points.push_back({1000.0, 1.4, 104.0, 9000.0, 250.0, 90.0});
  traj.points.push_back({1001.0, 1.4, 104.0, 9000.0, 250.0, 90.0});
  CHECK_THROWS_AS(render_history(traj, 2000.0, cfg), EmptyWindow);
}

TEST_CASE("stationary lone target renders one red dot and no blue") {
  RasterConfig cfg;
  const std::vector<AircraftState> states{
      {"TGT1", 5000.0, 1.4, 104.0, 8000.0, 0.0, 0.0}};
  const auto img = render_snapshot(states, "TGT1", 5000.0, cfg);

  int red = 0, blue = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      if (is_red(img, x, y)) ++red;
      if (is_blue(img, x, y)) ++blue;
    }
  CHECK(red == 1);
  CHECK(blue == 0);
}

TEST_CASE("eastbound vector length matches the frame scale") {
  RasterConfig cfg;
  cfg.width = 128;
  cfg.height = 128;
  // Area center, eastbound at 300 kt: dead-reckoned reach is 5 nmi in 60 s.
  const std::vector<AircraftState> states{
      {"TGT1", 5000.0, 1.4, 104.0, 8000.0, 300.0, 90.0}};
  const auto img = render_snapshot(states, "TGT1", 5000.0, cfg);

  int min_x = img.width, max_x = -1, min_y = img.height, max_y = -1;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      if (is_red(img, x, y)) {
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
      }
  REQUIRE(max_x >= 0);
  CHECK(max_y - min_y == 0);  // horizontal segment
  const double expected_px = 5.0 * snapshot_px_per_nmi(cfg);
  CHECK(std::fabs((max_x - min_x) - expected_px) <= 1.0);
  // Segment extends right of the aircraft position (frame center).
  const int cx = (img.width - 1) / 2;
  CHECK(min_x >= cx - 1);
  CHECK(max_x > cx);
}

TEST_CASE("relabeling a non-target aircraft leaves the snapshot unchanged") {
  RasterConfig cfg;
  const AircraftState target{"TGT1", 5000.0, 1.4, 104.0, 8000.0, 250.0, 45.0};
  const AircraftState other{"AAA9", 5000.0, 1.3, 103.8, 9000.0, 220.0, 270.0};
  auto relabeled = other;
  relabeled.callsign = "ZZZ7";
  const auto a = render_snapshot({target, other}, "TGT1", 5000.0, cfg);
  const auto b = render_snapshot({target, relabeled}, "TGT1", 5000.0, cfg);
  CHECK(a.pixels == b.pixels);
}

TEST_CASE("snapshot requires the target in the state list") {
  RasterConfig cfg;
  const std::vector<AircraftState> states{
      {"AAA1", 5000.0, 1.4, 104.0, 8000.0, 250.0, 90.0}};
  CHECK_THROWS_AS(render_snapshot(states, "TGT1", 5000.0, cfg), TargetMissing);
}

TEST_CASE("aircraft outside the area clip to the frame without writes") {
  RasterConfig cfg;
  const std::vector<AircraftState> states{
      {"TGT1", 5000.0, 1.4, 104.0, 8000.0, 250.0, 90.0},
      {"FAR1", 5000.0, 8.0, 110.0, 8000.0, 400.0, 0.0}};
  const auto img = render_snapshot(states, "TGT1", 5000.0, cfg);
  CHECK(img.pixels.size() == static_cast<std::size_t>(cfg.width) * cfg.height * 3);
  for (const float v : img.pixels) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("small frames are rejected") {
  RasterConfig cfg;
  cfg.width = 16;
  CHECK_THROWS_AS(cfg.validate(), BadConfig);
}

TEST_CASE("png and raw tensor files round-trip") {
  const auto dir = std::filesystem::temp_directory_path() / "atcline_raster_io";
  std::filesystem::create_directories(dir);
  RasterConfig cfg;
  const auto traj = northbound(1.2, 104.0, 130, 0.0004);
  const auto img = render_history(traj, 1125.0, cfg);

  save_png(dir / "hist.png", img);
  const auto png = read_binary_file(dir / "hist.png");
  REQUIRE(png.size() > 8);
  CHECK(png[0] == 0x89);
  CHECK(png[1] == 'P');
  CHECK(png[2] == 'N');
  CHECK(png[3] == 'G');

  save_image_bin(dir / "hist.bin", img);
  const auto loaded = load_image_bin(dir / "hist.bin");
  CHECK(loaded.width == img.width);
  CHECK(loaded.height == img.height);
  CHECK(loaded.kind == img.kind);
  CHECK(loaded.t == img.t);
  CHECK(loaded.callsign == img.callsign);
  CHECK(loaded.pixels == img.pixels);
  std::filesystem::remove_all(dir);
}
