#include "atcline/raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <json.hpp>
#include <zlib.h>

#include "atcline/geo.hpp"
#include "atcline/io.hpp"
#include "atcline/util.hpp"

namespace atcline {

namespace {

struct Rgb {
  float r, g, b;
};

constexpr Rgb kWhite{1.0f, 1.0f, 1.0f};
constexpr Rgb kBlue{0.0f, 0.0f, 1.0f};
constexpr Rgb kRed{1.0f, 0.0f, 0.0f};

SceneImage blank(int width, int height, ImageKind kind, double t,
                 std::string callsign) {
  SceneImage img;
  img.width = width;
  img.height = height;
  img.kind = kind;
  img.t = t;
  img.callsign = std::move(callsign);
  img.pixels.assign(static_cast<std::size_t>(width) * height * 3, 0.0f);
  for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
    img.pixels[i] = kWhite.r;
    img.pixels[i + 1] = kWhite.g;
    img.pixels[i + 2] = kWhite.b;
  }
  return img;
}

void put(SceneImage& img, long long x, long long y, const Rgb& c) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  const std::size_t i = static_cast<std::size_t>((y * img.width + x) * 3);
  img.pixels[i] = c.r;
  img.pixels[i + 1] = c.g;
  img.pixels[i + 2] = c.b;
}

// Bresenham, 1 px, no anti-aliasing; out-of-frame pixels are skipped.
void draw_line(SceneImage& img, long long x0, long long y0, long long x1,
               long long y1, const Rgb& c) {
  const long long dx = std::llabs(x1 - x0);
  const long long dy = -std::llabs(y1 - y0);
  const long long sx = x0 < x1 ? 1 : -1;
  const long long sy = y0 < y1 ? 1 : -1;
  long long err = dx + dy;
  while (true) {
    put(img, x0, y0, c);
    if (x0 == x1 && y0 == y1) break;
    const long long e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void draw_marker(SceneImage& img, long long x, long long y, const Rgb& c) {
  for (long long oy = -1; oy <= 1; ++oy)
    for (long long ox = -1; ox <= 1; ++ox) put(img, x + ox, y + oy, c);
}

struct FrameMap {
  double cx, cy;          // projected-plane center, nmi
  double scale;           // px per nmi
  double px_center, py_center;

  std::pair<long long, long long> to_px(const geo::LocalXY& p) const {
    return {std::llround(px_center + (p.x - cx) * scale),
            std::llround(py_center - (p.y - cy) * scale)};
  }
};

// Fit a projected bounding box into the frame, margin on all sides, aspect
// preserved. A degenerate box lands at the frame center.
FrameMap fit_frame(double min_x, double max_x, double min_y, double max_y,
                   const RasterConfig& cfg) {
  FrameMap m;
  m.cx = 0.5 * (min_x + max_x);
  m.cy = 0.5 * (min_y + max_y);
  m.px_center = (cfg.width - 1) / 2.0;
  m.py_center = (cfg.height - 1) / 2.0;
  const double usable_w = (1.0 - 2.0 * cfg.margin_frac) * (cfg.width - 1);
  const double usable_h = (1.0 - 2.0 * cfg.margin_frac) * (cfg.height - 1);
  const double span_x = max_x - min_x;
  const double span_y = max_y - min_y;
  double scale = std::numeric_limits<double>::infinity();
  if (span_x > 0.0) scale = std::min(scale, usable_w / span_x);
  if (span_y > 0.0) scale = std::min(scale, usable_h / span_y);
  m.scale = std::isinf(scale) ? 0.0 : scale;
  return m;
}

}  // namespace

void RasterConfig::validate() const {
  if (width < 32 || height < 32)
    throw BadConfig("raster frames must be at least 32x32");
  if (!(history_window_s > 0.0)) throw BadConfig("history_window_s must be positive");
  if (!(vector_horizon_s > 0.0)) throw BadConfig("vector_horizon_s must be positive");
  if (!(margin_frac >= 0.0 && margin_frac < 0.5))
    throw BadConfig("margin_frac must be in [0, 0.5)");
  if (!(area_lat_min < area_lat_max && area_lon_min < area_lon_max))
    throw BadConfig("snapshot area bounds are inverted");
}

std::string image_kind_name(ImageKind k) {
  return k == ImageKind::history ? "history" : "snapshot";
}

SceneImage render_history(const Trajectory& traj, double t, const RasterConfig& cfg) {
  cfg.validate();
  std::vector<geo::LatLon> path;
  for (const auto& p : traj.points)
    if (p.t >= t - cfg.history_window_s && p.t <= t) path.push_back({p.lat, p.lon});
  if (path.size() < 2)
    throw EmptyWindow("history window holds fewer than 2 points for " +
                      traj.callsign + " at t=" + fmt_double(t));

  const geo::LatLon origin = path.back();  // current position
  const double ref_lat = cfg.ref_lat.value_or(origin.lat);
  std::vector<geo::LocalXY> pts;
  pts.reserve(path.size());
  double min_x = 0.0, max_x = 0.0, min_y = 0.0, max_y = 0.0;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const auto p = geo::project_equirect(path[i], origin, ref_lat);
    if (i == 0) {
      min_x = max_x = p.x;
      min_y = max_y = p.y;
    } else {
      min_x = std::min(min_x, p.x);
      max_x = std::max(max_x, p.x);
      min_y = std::min(min_y, p.y);
      max_y = std::max(max_y, p.y);
    }
    pts.push_back(p);
  }
  const FrameMap frame = fit_frame(min_x, max_x, min_y, max_y, cfg);

  SceneImage img = blank(cfg.width, cfg.height, ImageKind::history, t, traj.callsign);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const auto [x0, y0] = frame.to_px(pts[i - 1]);
    const auto [x1, y1] = frame.to_px(pts[i]);
    draw_line(img, x0, y0, x1, y1, kBlue);
  }
  const auto [cx, cy] = frame.to_px(pts.back());
  draw_marker(img, cx, cy, kBlue);
  return img;
}

double snapshot_px_per_nmi(const RasterConfig& cfg) {
  const double ref_lat =
      cfg.ref_lat.value_or(0.5 * (cfg.area_lat_min + cfg.area_lat_max));
  const geo::LatLon origin{0.5 * (cfg.area_lat_min + cfg.area_lat_max),
                           0.5 * (cfg.area_lon_min + cfg.area_lon_max)};
  const auto lo =
      geo::project_equirect({cfg.area_lat_min, cfg.area_lon_min}, origin, ref_lat);
  const auto hi =
      geo::project_equirect({cfg.area_lat_max, cfg.area_lon_max}, origin, ref_lat);
  return fit_frame(lo.x, hi.x, lo.y, hi.y, cfg).scale;
}

SceneImage render_snapshot(const std::vector<AircraftState>& states,
                           const std::string& target, double t,
                           const RasterConfig& cfg) {
  cfg.validate();
  const auto target_it =
      std::find_if(states.begin(), states.end(),
                   [&](const AircraftState& s) { return s.callsign == target; });
  if (target_it == states.end())
    throw TargetMissing("target " + target + " absent from snapshot states");

  const double ref_lat =
      cfg.ref_lat.value_or(0.5 * (cfg.area_lat_min + cfg.area_lat_max));
  const geo::LatLon origin{0.5 * (cfg.area_lat_min + cfg.area_lat_max),
                           0.5 * (cfg.area_lon_min + cfg.area_lon_max)};
  const auto lo =
      geo::project_equirect({cfg.area_lat_min, cfg.area_lon_min}, origin, ref_lat);
  const auto hi =
      geo::project_equirect({cfg.area_lat_max, cfg.area_lon_max}, origin, ref_lat);
  const FrameMap frame = fit_frame(lo.x, hi.x, lo.y, hi.y, cfg);

  SceneImage img = blank(cfg.width, cfg.height, ImageKind::snapshot, t, target);
  auto draw_state = [&](const AircraftState& s, const Rgb& color) {
    const auto p0 = geo::project_equirect({s.lat, s.lon}, origin, ref_lat);
    const double reach_nmi = s.gs * cfg.vector_horizon_s / 3600.0;
    const geo::LocalXY p1{p0.x + reach_nmi * std::sin(deg2rad(s.hdg)),
                          p0.y + reach_nmi * std::cos(deg2rad(s.hdg))};
    const auto [x0, y0] = frame.to_px(p0);
    const auto [x1, y1] = frame.to_px(p1);
    draw_line(img, x0, y0, x1, y1, color);
  };
  for (const auto& s : states)
    if (s.callsign != target) draw_state(s, kBlue);
  draw_state(*target_it, kRed);  // target drawn last, on top
  return img;
}

namespace {

void append_be32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
  buf.push_back(static_cast<std::uint8_t>(v >> 24));
  buf.push_back(static_cast<std::uint8_t>(v >> 16));
  buf.push_back(static_cast<std::uint8_t>(v >> 8));
  buf.push_back(static_cast<std::uint8_t>(v));
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& data) {
  append_be32(out, static_cast<std::uint32_t>(data.size()));
  std::vector<std::uint8_t> body(type, type + 4);
  body.insert(body.end(), data.begin(), data.end());
  out.insert(out.end(), body.begin(), body.end());
  const auto crc =
      crc32(0, body.data(), static_cast<uInt>(body.size()));
  append_be32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

void save_png(const std::filesystem::path& path, const SceneImage& img) {
  // Scanlines: filter byte 0 followed by 8-bit RGB.
  std::vector<std::uint8_t> raw;
  raw.reserve(static_cast<std::size_t>(img.height) * (1 + img.width * 3));
  for (int y = 0; y < img.height; ++y) {
    raw.push_back(0);
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(img.at(x, y, c), 0.0f, 1.0f);
        raw.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
      }
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(),
                static_cast<uLong>(raw.size()), 9) != Z_OK)
    throw IoError("zlib compression failed for " + path.string());
  compressed.resize(bound);

  std::vector<std::uint8_t> out{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::vector<std::uint8_t> ihdr;
  append_be32(ihdr, static_cast<std::uint32_t>(img.width));
  append_be32(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // truecolor
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // no interlace
  append_chunk(out, "IHDR", ihdr);
  append_chunk(out, "IDAT", compressed);
  append_chunk(out, "IEND", {});
  write_binary_file(path, out.data(), out.size());
}

void save_image_bin(const std::filesystem::path& path, const SceneImage& img) {
  std::vector<std::uint8_t> buf;
  buf.reserve(img.pixels.size() * 4);
  for (const float v : img.pixels) append_f32(buf, v);
  write_binary_file(path, buf.data(), buf.size());

  nlohmann::ordered_json j;
  j["kind"] = image_kind_name(img.kind);
  j["t"] = img.t;
  j["callsign"] = img.callsign;
  j["shape"] = {img.height, img.width, 3};
  write_text_file(path.string() + ".json", j.dump() + "\n");
}

SceneImage load_image_bin(const std::filesystem::path& path) {
  const auto j = nlohmann::json::parse(read_text_file(path.string() + ".json"));
  SceneImage img;
  img.kind = j.at("kind").get<std::string>() == "history" ? ImageKind::history
                                                          : ImageKind::snapshot;
  img.t = j.at("t").get<double>();
  img.callsign = j.at("callsign").get<std::string>();
  img.height = j.at("shape")[0].get<int>();
  img.width = j.at("shape")[1].get<int>();
  const auto bytes = read_binary_file(path);
  const std::size_t expect = static_cast<std::size_t>(img.height) * img.width * 3 * 4;
  if (bytes.size() != expect)
    throw IoError("image tensor size mismatch in " + path.string());
  BinaryReader r(bytes);
  img.pixels.resize(expect / 4);
  for (auto& v : img.pixels) v = r.f32();
  return img;
}

}  // namespace atcline
