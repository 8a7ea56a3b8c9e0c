#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <vector>

#include "s2l/geometry.hpp"
#include "s2l/image.hpp"

namespace s2l::detect {

/// Per-pixel text confidence in [0, 1].
struct ScoreMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  float at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// One rotated-box sample: distances from the pixel to the four box edges
/// and the box rotation in radians, in (-pi/2, pi/2].
struct RBox {
  float top = 0;
  float right = 0;
  float bottom = 0;
  float left = 0;
  float angle = 0;
};

struct GeoMap {
  int width = 0;
  int height = 0;
  std::vector<RBox> values;

  const RBox& at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Four vertices with consistent winding plus a confidence.
struct Quad {
  std::array<Point, 4> pts{};
  double score = 0;

  double area() const;
  Point center() const;
  static Quad axis_aligned(double x0, double y0, double x1, double y1, double score = 1.0);
};

/// Detector output maps. `scale` maps map pixels to image pixels
/// (1 for full resolution, 4 for the usual quarter-resolution head).
struct DetectorMaps {
  ScoreMap score;
  GeoMap geo;
  int scale = 1;
};

std::vector<Quad> decode_rbox(const ScoreMap& score, const GeoMap& geo, double score_thresh,
                              int scale = 1);

/// Intersection over union of two convex quads. Throws on zero-area input.
double iou(const Quad& a, const Quad& b);

/// Score-weighted vertex average; equal (or zero) weights average plainly.
/// The merged score is the larger of the two.
Quad weighted_merge(const Quad& a, const Quad& b);

/// Greedy suppression: highest score first (ties keep input order), drop any
/// candidate whose IoU with a kept quad is >= iou_thresh.
std::vector<Quad> standard_nms(std::vector<Quad> quads, double iou_thresh);

/// Locality-aware NMS: consecutive quads in input (row-major) order with
/// IoU >= iou_thresh are merged, then the merged set goes through
/// standard_nms.
std::vector<Quad> locality_aware_nms(const std::vector<Quad>& quads, double iou_thresh);

// Raster fixture format: eight little-endian uint32 header words
//   magic "S2LR", version (1), width, height, channels, scale, 0, 0
// followed by width * height * channels little-endian float32 values,
// channel-interleaved. Detector fixtures carry six channels:
//   score, top, right, bottom, left, angle.
inline constexpr std::uint32_t kRasterMagic = 0x524C3253;  // bytes "S2LR"
inline constexpr std::uint32_t kRasterVersion = 1;

struct Raster {
  int width = 0;
  int height = 0;
  int channels = 0;
  int scale = 1;
  std::vector<float> values;
};

Raster read_raster(const std::filesystem::path& path);
void write_raster(const std::filesystem::path& path, const Raster& raster);

DetectorMaps maps_from_raster(const Raster& raster);
Raster raster_from_maps(const DetectorMaps& maps);

/// Source of score/geometry maps for an image.
class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;
  virtual DetectorMaps predict(const RgbImage& image, const std::filesystem::path& image_path) = 0;
};

/// Reference backend: loads precomputed maps from a raster file named
/// `<image file name>.maps`, looked up next to the image or in `maps_dir`.
class FixtureBackend : public DetectorBackend {
 public:
  explicit FixtureBackend(std::optional<std::filesystem::path> maps_dir = std::nullopt);
  DetectorMaps predict(const RgbImage& image, const std::filesystem::path& image_path) override;

 private:
  std::optional<std::filesystem::path> maps_dir_;
};

}  // namespace s2l::detect
