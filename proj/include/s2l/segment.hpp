#pragma once

#include <vector>

#include "s2l/detect.hpp"
#include "s2l/geometry.hpp"
#include "s2l/image.hpp"

namespace s2l::segment {

/// Axis-aligned pixel box, half-open: covers x_min <= x < x_max and
/// y_min <= y < y_max.
struct BBox {
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;

  int width() const { return x_max - x_min; }
  int height() const { return y_max - y_min; }
  bool contains(const BBox& other) const {
    return x_min <= other.x_min && y_min <= other.y_min && x_max >= other.x_max &&
           y_max >= other.y_max;
  }
  bool contains_pixel(int x, int y) const {
    return x >= x_min && x < x_max && y >= y_min && y < y_max;
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

/// True when the interiors overlap (touching edges do not count).
bool overlaps(const BBox& a, const BBox& b);

struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<bool> bits;

  BinaryMask() = default;
  BinaryMask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, false) {}
  bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x]; }
  void set(int x, int y, bool v) { bits[static_cast<std::size_t>(y) * width + x] = v; }
  std::size_t count() const;
};

/// Counter-clockwise (y-up orientation) convex polygon.
struct HullPolygon {
  std::vector<Point> vertices;
};

struct SegmentConfig {
  int grow_step = 5;
  /// Cap on cumulative growth per side; <= 0 means 10% of the image width.
  int max_growth = 0;
};

/// Repeatedly merges boxes whose interiors overlap into their envelope.
std::vector<BBox> merge_overlapping(std::vector<BBox> boxes);

/// Simultaneous lateral growth. Every round each still-active left/right
/// edge moves outward by `step`. An edge that would cross a facing edge of a
/// vertically overlapping neighbor stops where the two meet: at the midpoint
/// of the gap if the neighbor edge is also advancing, at the neighbor edge
/// otherwise. Edges also stop at the image border and at `max_growth`.
std::vector<BBox> grow_boxes(const std::vector<BBox>& boxes, int step, int max_growth, int img_w,
                             int img_h);

/// Otsu's global threshold: the cutoff t maximizing between-class variance
/// for classes {v <= t} and {v > t}. Ties resolve to the smallest t. Returns
/// -1 for a single-valued histogram (every pixel is foreground).
int otsu_threshold(const GrayImage& img);

/// Pixels inside some box that are brighter than the Otsu threshold.
BinaryMask boxes_to_mask(const std::vector<BBox>& boxes, const GrayImage& img);

/// Andrew's monotone chain. Collinear boundary points are dropped.
/// Throws "degenerate hull" for fewer than three non-collinear points.
HullPolygon convex_hull(std::vector<Point> points);

/// Inside-or-on-boundary test against a convex counter-clockwise polygon.
bool hull_contains(const HullPolygon& hull, const Point& p);

/// Zeroes every pixel whose center lies outside the hull.
RgbImage mask_by_hull(const RgbImage& img, const HullPolygon& hull);

struct Segmentation {
  RgbImage masked;
  HullPolygon hull;
  std::vector<BBox> detected;  // axis-aligned envelopes of the input quads
  std::vector<BBox> grown;
  BinaryMask mask;
};

/// Axis-aligned envelope of a quad, rounded outward and clamped to the image.
BBox envelope(const detect::Quad& quad, int img_w, int img_h);

Segmentation segment_text_region(const RgbImage& img, const std::vector<detect::Quad>& quads,
                                 const SegmentConfig& cfg);

}  // namespace s2l::segment
