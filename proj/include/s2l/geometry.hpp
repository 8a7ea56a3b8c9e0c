#pragma once

#include <array>
#include <span>
#include <vector>

namespace s2l {

struct Point {
  double x = 0;
  double y = 0;

  friend bool operator==(const Point&, const Point&) = default;
  friend auto operator<=>(const Point&, const Point&) = default;
};

/// (b - a) x (c - a); positive when a, b, c turn counter-clockwise in a
/// y-up frame.
inline double cross(const Point& a, const Point& b, const Point& c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

/// Shoelace signed area.
double signed_area(std::span<const Point> poly);

/// Intersection of a polygon with a convex clip polygon (Sutherland-Hodgman).
/// Both inputs may have either winding.
std::vector<Point> clip_convex(std::span<const Point> subject, std::span<const Point> clip);

/// Area of the intersection of two convex polygons.
double convex_intersection_area(std::span<const Point> a, std::span<const Point> b);

}  // namespace s2l
