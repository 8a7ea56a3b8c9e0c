#include "s2l/detect.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "s2l/error.hpp"

namespace s2l::detect {

double Quad::area() const { return std::abs(signed_area(pts)); }

Point Quad::center() const {
  Point c;
  for (const auto& p : pts) {
    c.x += p.x / 4;
    c.y += p.y / 4;
  }
  return c;
}

Quad Quad::axis_aligned(double x0, double y0, double x1, double y1, double score) {
  return {{Point{x0, y0}, Point{x1, y0}, Point{x1, y1}, Point{x0, y1}}, score};
}

std::vector<Quad> decode_rbox(const ScoreMap& score, const GeoMap& geo, double score_thresh,
                              int scale) {
  if (score.width != geo.width || score.height != geo.height)
    throw Error("score and geometry maps differ in size");
  if (score.values.size() != static_cast<std::size_t>(score.width) * score.height ||
      geo.values.size() != score.values.size())
    throw Error("map buffer does not match its dimensions");
  if (scale <= 0) throw Error("map scale must be positive");

  std::vector<Quad> quads;
  for (int y = 0; y < score.height; ++y) {
    for (int x = 0; x < score.width; ++x) {
      const double s = score.at(x, y);
      if (s < score_thresh) continue;
      const RBox& g = geo.at(x, y);
      if (g.top + g.bottom <= 0 || g.left + g.right <= 0) continue;  // zero-area box
      const double ox = static_cast<double>(x) * scale;
      const double oy = static_cast<double>(y) * scale;
      const double c = std::cos(static_cast<double>(g.angle));
      const double sn = std::sin(static_cast<double>(g.angle));
      const std::array<Point, 4> local{Point{-g.left, -g.top}, Point{g.right, -g.top},
                                       Point{g.right, g.bottom}, Point{-g.left, g.bottom}};
      Quad q;
      q.score = s;
      for (std::size_t i = 0; i < 4; ++i)
        q.pts[i] = {ox + local[i].x * c - local[i].y * sn, oy + local[i].x * sn + local[i].y * c};
      quads.push_back(q);
    }
  }
  return quads;
}

double iou(const Quad& a, const Quad& b) {
  const double area_a = a.area();
  const double area_b = b.area();
  if (area_a <= 0 || area_b <= 0) throw Error("iou of a degenerate quad");
  const double inter = convex_intersection_area(a.pts, b.pts);
  const double uni = area_a + area_b - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

Quad weighted_merge(const Quad& a, const Quad& b) {
  double wa = a.score;
  double wb = b.score;
  if (wa == wb || wa + wb <= 0) wa = wb = 1;
  Quad m;
  for (std::size_t i = 0; i < 4; ++i) {
    m.pts[i].x = (wa * a.pts[i].x + wb * b.pts[i].x) / (wa + wb);
    m.pts[i].y = (wa * a.pts[i].y + wb * b.pts[i].y) / (wa + wb);
  }
  m.score = std::max(a.score, b.score);
  return m;
}

std::vector<Quad> standard_nms(std::vector<Quad> quads, double iou_thresh) {
  std::stable_sort(quads.begin(), quads.end(),
                   [](const Quad& l, const Quad& r) { return l.score > r.score; });
  std::vector<Quad> kept;
  for (const auto& q : quads) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(),
                                        [&](const Quad& k) { return iou(k, q) >= iou_thresh; });
    if (!suppressed) kept.push_back(q);
  }
  return kept;
}

std::vector<Quad> locality_aware_nms(const std::vector<Quad>& quads, double iou_thresh) {
  std::vector<Quad> merged;
  for (const auto& q : quads) {
    if (!merged.empty() && iou(merged.back(), q) >= iou_thresh)
      merged.back() = weighted_merge(merged.back(), q);
    else
      merged.push_back(q);
  }
  return standard_nms(std::move(merged), iou_thresh);
}

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                         static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  out.write(bytes, 4);
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& b, std::size_t off) {
  return static_cast<std::uint32_t>(b[off]) | (static_cast<std::uint32_t>(b[off + 1]) << 8) |
         (static_cast<std::uint32_t>(b[off + 2]) << 16) |
         (static_cast<std::uint32_t>(b[off + 3]) << 24);
}

}  // namespace

Raster read_raster(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  if (bytes.size() < 32) throw Error("raster header truncated: " + path.string());
  if (get_u32(bytes, 0) != kRasterMagic) throw Error("bad raster magic: " + path.string());
  if (get_u32(bytes, 4) != kRasterVersion) throw Error("unsupported raster version");
  Raster r;
  r.width = static_cast<int>(get_u32(bytes, 8));
  r.height = static_cast<int>(get_u32(bytes, 12));
  r.channels = static_cast<int>(get_u32(bytes, 16));
  r.scale = static_cast<int>(get_u32(bytes, 20));
  if (r.width <= 0 || r.height <= 0 || r.channels <= 0 || r.scale <= 0)
    throw Error("invalid raster header");
  const std::size_t n = static_cast<std::size_t>(r.width) * r.height * r.channels;
  if (bytes.size() != 32 + n * 4) throw Error("raster payload size mismatch");
  r.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.values[i] = std::bit_cast<float>(get_u32(bytes, 32 + i * 4));
  return r;
}

void write_raster(const std::filesystem::path& path, const Raster& raster) {
  if (raster.values.size() != static_cast<std::size_t>(raster.width) * raster.height * raster.channels)
    throw Error("raster buffer does not match its header");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (std::uint32_t v : {kRasterMagic, kRasterVersion, static_cast<std::uint32_t>(raster.width),
                          static_cast<std::uint32_t>(raster.height),
                          static_cast<std::uint32_t>(raster.channels),
                          static_cast<std::uint32_t>(raster.scale), 0u, 0u})
    put_u32(out, v);
  for (float f : raster.values) put_u32(out, std::bit_cast<std::uint32_t>(f));
  if (!out) throw Error("write failed: " + path.string());
}

DetectorMaps maps_from_raster(const Raster& raster) {
  if (raster.channels != 6) throw Error("detector raster needs 6 channels");
  DetectorMaps maps;
  maps.scale = raster.scale;
  maps.score.width = maps.geo.width = raster.width;
  maps.score.height = maps.geo.height = raster.height;
  const std::size_t n = static_cast<std::size_t>(raster.width) * raster.height;
  maps.score.values.resize(n);
  maps.geo.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float* px = &raster.values[i * 6];
    if (!(px[0] >= 0 && px[0] <= 1)) throw Error("score outside [0,1]");
    if (px[1] < 0 || px[2] < 0 || px[3] < 0 || px[4] < 0) throw Error("negative box distance");
    if (!(px[5] > -std::numbers::pi / 2 - 1e-6 && px[5] <= std::numbers::pi / 2 + 1e-6))
      throw Error("angle outside (-pi/2, pi/2]");
    maps.score.values[i] = px[0];
    maps.geo.values[i] = {px[1], px[2], px[3], px[4], px[5]};
  }
  return maps;
}

Raster raster_from_maps(const DetectorMaps& maps) {
  if (maps.score.width != maps.geo.width || maps.score.height != maps.geo.height)
    throw Error("score and geometry maps differ in size");
  Raster r{maps.score.width, maps.score.height, 6, maps.scale, {}};
  r.values.reserve(maps.score.values.size() * 6);
  for (std::size_t i = 0; i < maps.score.values.size(); ++i) {
    const RBox& g = maps.geo.values[i];
    r.values.insert(r.values.end(), {maps.score.values[i], g.top, g.right, g.bottom, g.left, g.angle});
  }
  return r;
}

FixtureBackend::FixtureBackend(std::optional<std::filesystem::path> maps_dir)
    : maps_dir_(std::move(maps_dir)) {}

DetectorMaps FixtureBackend::predict(const RgbImage& image, const std::filesystem::path& image_path) {
  const std::string name = image_path.filename().string() + ".maps";
  std::filesystem::path file = image_path.parent_path() / name;
  if (maps_dir_ && std::filesystem::exists(*maps_dir_ / name)) file = *maps_dir_ / name;
  if (!std::filesystem::exists(file)) throw Error("no detector maps for " + image_path.string());
  DetectorMaps maps = maps_from_raster(read_raster(file));
  if (static_cast<long>(maps.score.width) * maps.scale > static_cast<long>(image.width) + maps.scale ||
      static_cast<long>(maps.score.height) * maps.scale > static_cast<long>(image.height) + maps.scale)
    throw Error("detector maps larger than the image");
  return maps;
}

}  // namespace s2l::detect
