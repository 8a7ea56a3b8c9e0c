#include "s2l/geometry.hpp"

#include <cmath>

namespace s2l {

double signed_area(std::span<const Point> poly) {
  double twice = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point& p = poly[i];
    const Point& q = poly[(i + 1) % poly.size()];
    twice += p.x * q.y - q.x * p.y;
  }
  return twice / 2;
}

std::vector<Point> clip_convex(std::span<const Point> subject, std::span<const Point> clip) {
  std::vector<Point> output(subject.begin(), subject.end());
  if (clip.size() < 3) return {};
  const double orientation = signed_area(clip) >= 0 ? 1.0 : -1.0;

  for (std::size_t e = 0; e < clip.size() && !output.empty(); ++e) {
    const Point& a = clip[e];
    const Point& b = clip[(e + 1) % clip.size()];
    auto inside = [&](const Point& p) { return orientation * cross(a, b, p) >= 0; };
    auto intersect = [&](const Point& p, const Point& q) {
      const double cp = cross(a, b, p);
      const double cq = cross(a, b, q);
      const double t = cp / (cp - cq);
      return Point{p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
    };

    std::vector<Point> input;
    input.swap(output);
    for (std::size_t i = 0; i < input.size(); ++i) {
      const Point& cur = input[i];
      const Point& prev = input[(i + input.size() - 1) % input.size()];
      const bool cur_in = inside(cur);
      const bool prev_in = inside(prev);
      if (cur_in) {
        if (!prev_in) output.push_back(intersect(prev, cur));
        output.push_back(cur);
      } else if (prev_in) {
        output.push_back(intersect(prev, cur));
      }
    }
  }
  return output;
}

double convex_intersection_area(std::span<const Point> a, std::span<const Point> b) {
  const auto poly = clip_convex(a, b);
  if (poly.size() < 3) return 0;
  return std::abs(signed_area(poly));
}

}  // namespace s2l
