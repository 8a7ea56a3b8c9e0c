#include "s2l/segment.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "s2l/error.hpp"

namespace s2l::segment {

bool overlaps(const BBox& a, const BBox& b) {
  return a.x_min < b.x_max && b.x_min < a.x_max && a.y_min < b.y_max && b.y_min < a.y_max;
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), true));
}

std::vector<BBox> merge_overlapping(std::vector<BBox> boxes) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < boxes.size() && !changed; ++i) {
      for (std::size_t j = i + 1; j < boxes.size(); ++j) {
        if (!overlaps(boxes[i], boxes[j])) continue;
        boxes[i] = {std::min(boxes[i].x_min, boxes[j].x_min), std::min(boxes[i].y_min, boxes[j].y_min),
                    std::max(boxes[i].x_max, boxes[j].x_max), std::max(boxes[i].y_max, boxes[j].y_max)};
        boxes.erase(boxes.begin() + static_cast<std::ptrdiff_t>(j));
        changed = true;
        break;
      }
    }
  }
  return boxes;
}

namespace {

bool rows_overlap(const BBox& a, const BBox& b) { return a.y_min < b.y_max && b.y_min < a.y_max; }

int floor_mid(int a, int b) {
  const int s = a + b;
  return s >= 0 ? s / 2 : -((-s + 1) / 2);
}

struct GrowState {
  BBox box;
  bool left_active = true;
  bool right_active = true;
  int grown_left = 0;
  int grown_right = 0;
};

}  // namespace

std::vector<BBox> grow_boxes(const std::vector<BBox>& boxes, int step, int max_growth, int img_w,
                             int img_h) {
  if (step <= 0) throw Error("grow step must be positive");
  if (max_growth < 0) throw Error("max_growth must be non-negative");
  for (const auto& b : boxes)
    if (b.x_min >= b.x_max || b.y_min >= b.y_max) throw Error("empty box");

  std::vector<GrowState> state;
  for (BBox b : merge_overlapping(boxes)) {
    b.x_min = std::clamp(b.x_min, 0, img_w);
    b.x_max = std::clamp(b.x_max, 0, img_w);
    b.y_min = std::clamp(b.y_min, 0, img_h);
    b.y_max = std::clamp(b.y_max, 0, img_h);
    state.push_back({b, max_growth > 0 && b.x_min > 0, max_growth > 0 && b.x_max < img_w, 0, 0});
  }

  const std::size_t n = state.size();
  std::vector<int> prop_left(n);
  std::vector<int> prop_right(n);
  auto any_active = [&] {
    return std::any_of(state.begin(), state.end(),
                       [](const GrowState& s) { return s.left_active || s.right_active; });
  };

  while (any_active()) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto& s = state[i];
      prop_left[i] = s.left_active
                         ? std::max(0, s.box.x_min - std::min(step, max_growth - s.grown_left))
                         : s.box.x_min;
      prop_right[i] = s.right_active
                          ? std::min(img_w, s.box.x_max + std::min(step, max_growth - s.grown_right))
                          : s.box.x_max;
    }

    std::vector<GrowState> next = state;
    for (std::size_t i = 0; i < n; ++i) {
      const BBox& bi = state[i].box;
      int new_left = prop_left[i];
      int new_right = prop_right[i];
      bool hit_left = false;
      bool hit_right = false;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i || !rows_overlap(bi, state[j].box)) continue;
        const BBox& bj = state[j].box;
        if (state[i].right_active && bj.x_min >= bi.x_max && prop_right[i] > prop_left[j]) {
          const int meet = state[j].left_active
                               ? std::min(prop_right[i], std::max(floor_mid(bi.x_max, bj.x_min), prop_left[j]))
                               : bj.x_min;
          new_right = std::min(new_right, meet);
          hit_right = true;
        }
        if (state[i].left_active && bj.x_max <= bi.x_min && prop_left[i] < prop_right[j]) {
          const int meet = state[j].right_active
                               ? std::max(prop_left[i], std::min(floor_mid(bj.x_max, bi.x_min), prop_right[j]))
                               : bj.x_max;
          new_left = std::max(new_left, meet);
          hit_left = true;
        }
      }
      GrowState& s = next[i];
      if (s.left_active) {
        new_left = std::min(new_left, bi.x_min);
        s.grown_left += bi.x_min - new_left;
        s.left_active = !hit_left && new_left != bi.x_min && new_left > 0 && s.grown_left < max_growth;
        s.box.x_min = new_left;
      }
      if (s.right_active) {
        new_right = std::max(new_right, bi.x_max);
        s.grown_right += new_right - bi.x_max;
        s.right_active =
            !hit_right && new_right != bi.x_max && new_right < img_w && s.grown_right < max_growth;
        s.box.x_max = new_right;
      }
    }
    state = std::move(next);
  }

  std::vector<BBox> out;
  out.reserve(n);
  for (const auto& s : state) out.push_back(s.box);
  return out;
}

int otsu_threshold(const GrayImage& img) {
  std::array<double, 256> hist{};
  for (auto v : img.data) hist[v] += 1;
  const double total = static_cast<double>(img.data.size());
  double sum_all = 0;
  for (int v = 0; v < 256; ++v) sum_all += v * hist[v];

  int best_t = -1;
  double best_var = -1;
  double w0 = 0;
  double sum0 = 0;
  for (int t = 0; t < 255; ++t) {
    w0 += hist[t];
    sum0 += t * hist[t];
    const double w1 = total - w0;
    if (w0 == 0 || w1 == 0) continue;
    const double mu0 = sum0 / w0;
    const double mu1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (between > best_var) {
      best_var = between;
      best_t = t;
    }
  }
  return best_t;
}

BinaryMask boxes_to_mask(const std::vector<BBox>& boxes, const GrayImage& img) {
  BinaryMask mask(img.width, img.height);
  if (boxes.empty() || img.empty()) return mask;
  const int t = otsu_threshold(img);
  for (const auto& b : boxes) {
    for (int y = std::max(0, b.y_min); y < std::min(img.height, b.y_max); ++y)
      for (int x = std::max(0, b.x_min); x < std::min(img.width, b.x_max); ++x)
        if (img.at(x, y) > t) mask.set(x, y, true);
  }
  return mask;
}

HullPolygon convex_hull(std::vector<Point> points) {
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  if (points.size() < 3) throw Error("degenerate hull");

  std::vector<Point> hull(2 * points.size());
  std::size_t k = 0;
  for (const auto& p : points) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = points.size() - 1, lower = k + 1; i-- > 0;) {
    const auto& p = points[i];
    while (k >= lower && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  hull.resize(k - 1);
  if (hull.size() < 3) throw Error("degenerate hull");
  return {std::move(hull)};
}

bool hull_contains(const HullPolygon& hull, const Point& p) {
  const auto& v = hull.vertices;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (cross(v[i], v[(i + 1) % v.size()], p) < -1e-9) return false;
  return !v.empty();
}

RgbImage mask_by_hull(const RgbImage& img, const HullPolygon& hull) {
  if (hull.vertices.size() < 3) throw Error("degenerate hull");
  RgbImage out(img.width, img.height, 0);
  double x_lo = hull.vertices[0].x, x_hi = x_lo, y_lo = hull.vertices[0].y, y_hi = y_lo;
  for (const auto& p : hull.vertices) {
    x_lo = std::min(x_lo, p.x);
    x_hi = std::max(x_hi, p.x);
    y_lo = std::min(y_lo, p.y);
    y_hi = std::max(y_hi, p.y);
  }
  const int y0 = std::max(0, static_cast<int>(std::floor(y_lo)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(y_hi)));
  const int x0 = std::max(0, static_cast<int>(std::floor(x_lo)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(x_hi)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (hull_contains(hull, {static_cast<double>(x), static_cast<double>(y)}))
        for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(x, y, c);
  return out;
}

BBox envelope(const detect::Quad& quad, int img_w, int img_h) {
  double x_lo = quad.pts[0].x, x_hi = x_lo, y_lo = quad.pts[0].y, y_hi = y_lo;
  for (const auto& p : quad.pts) {
    x_lo = std::min(x_lo, p.x);
    x_hi = std::max(x_hi, p.x);
    y_lo = std::min(y_lo, p.y);
    y_hi = std::max(y_hi, p.y);
  }
  // Snap to the integer grid first so float noise does not widen the box.
  auto snap = [](double v) { return std::abs(v - std::round(v)) < 1e-6 ? std::round(v) : v; };
  return {std::clamp(static_cast<int>(std::floor(snap(x_lo))), 0, img_w),
          std::clamp(static_cast<int>(std::floor(snap(y_lo))), 0, img_h),
          std::clamp(static_cast<int>(std::ceil(snap(x_hi))), 0, img_w),
          std::clamp(static_cast<int>(std::ceil(snap(y_hi))), 0, img_h)};
}

Segmentation segment_text_region(const RgbImage& img, const std::vector<detect::Quad>& quads,
                                 const SegmentConfig& cfg) {
  if (quads.empty()) throw Error("no text detected");
  Segmentation seg;
  for (const auto& q : quads) {
    const BBox b = envelope(q, img.width, img.height);
    if (b.width() > 0 && b.height() > 0) seg.detected.push_back(b);
  }
  if (seg.detected.empty()) throw Error("no text detected");

  const int max_growth =
      cfg.max_growth > 0 ? cfg.max_growth : static_cast<int>(std::lround(0.1 * img.width));
  seg.grown = grow_boxes(seg.detected, cfg.grow_step, max_growth, img.width, img.height);
  seg.mask = boxes_to_mask(seg.grown, to_gray(img));

  std::vector<Point> fg;
  fg.reserve(seg.mask.count());
  for (int y = 0; y < seg.mask.height; ++y)
    for (int x = 0; x < seg.mask.width; ++x)
      if (seg.mask.at(x, y)) fg.push_back({static_cast<double>(x), static_cast<double>(y)});
  try {
    seg.hull = convex_hull(std::move(fg));
  } catch (const Error&) {
    // Too few foreground pixels for a polygon: fall back to the box corners.
    std::vector<Point> corners;
    for (const auto& b : seg.grown) {
      corners.push_back({static_cast<double>(b.x_min), static_cast<double>(b.y_min)});
      corners.push_back({static_cast<double>(b.x_max - 1), static_cast<double>(b.y_min)});
      corners.push_back({static_cast<double>(b.x_max - 1), static_cast<double>(b.y_max - 1)});
      corners.push_back({static_cast<double>(b.x_min), static_cast<double>(b.y_max - 1)});
    }
    seg.hull = convex_hull(std::move(corners));
  }
  seg.masked = mask_by_hull(img, seg.hull);
  return seg;
}

}  // namespace s2l::segment
