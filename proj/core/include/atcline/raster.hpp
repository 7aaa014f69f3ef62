#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "atcline/trajectory.hpp"

namespace atcline {

enum class ImageKind { history, snapshot };

struct RasterConfig {
  int width = 64;
  int height = 64;
  double history_window_s = 120.0;
  double vector_horizon_s = 60.0;
  // Fixed geographic frame for snapshots (terminal-area rectangle).
  double area_lat_min = 1.0;
  double area_lat_max = 1.8;
  double area_lon_min = 103.4;
  double area_lon_max = 104.6;
  double margin_frac = 0.1;
  // Equirectangular reference latitude; unset uses the scene's own latitude
  // (current position for history, area center for snapshots).
  std::optional<double> ref_lat;

  void validate() const;
};

struct SceneImage {
  int width = 0;
  int height = 0;
  ImageKind kind = ImageKind::history;
  double t = 0.0;
  std::string callsign;
  std::vector<float> pixels;  // row-major height*width*3, RGB in [0,1]

  float at(int x, int y, int c) const {
    return pixels[static_cast<std::size_t>((y * width + x) * 3 + c)];
  }
};

std::string image_kind_name(ImageKind k);

// Prior flight path over [t - history_window_s, t], fitted to the frame and
// drawn as a blue polyline on white, north-up, current position marked.
SceneImage render_history(const Trajectory& traj, double t, const RasterConfig& cfg);

// All aircraft at one instant inside the fixed area frame, each drawn as a
// dead-reckoned velocity vector; the target red, everyone else blue.
SceneImage render_snapshot(const std::vector<AircraftState>& states,
                           const std::string& target, double t,
                           const RasterConfig& cfg);

// Pixels-per-nautical-mile scale a snapshot of this config uses.
double snapshot_px_per_nmi(const RasterConfig& cfg);

void save_png(const std::filesystem::path& path, const SceneImage& img);

// Raw float32 little-endian tensor plus a JSON sidecar (<path>.json) holding
// kind, t, callsign, and shape.
void save_image_bin(const std::filesystem::path& path, const SceneImage& img);
SceneImage load_image_bin(const std::filesystem::path& path);

}  // namespace atcline
