#pragma once

#include "pegcl/common.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pegcl {

enum class ShapeKind { Cylinder, Cuboid, Hexagon, Triangle, Trapezoid, Star };

inline constexpr std::array<ShapeKind, 6> kAllShapes = {
    ShapeKind::Cylinder, ShapeKind::Cuboid,    ShapeKind::Hexagon,
    ShapeKind::Triangle, ShapeKind::Trapezoid, ShapeKind::Star};

inline std::string_view shape_name(ShapeKind k) {
  switch (k) {
    case ShapeKind::Cylinder: return "cylinder";
    case ShapeKind::Cuboid: return "cuboid";
    case ShapeKind::Hexagon: return "hexagon";
    case ShapeKind::Triangle: return "triangle";
    case ShapeKind::Trapezoid: return "trapezoid";
    case ShapeKind::Star: return "star";
  }
  return "unknown";
}

inline ShapeKind parse_shape(std::string_view name) {
  std::string lower(name);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (auto k : kAllShapes)
    if (shape_name(k) == lower) return k;
  if (lower == "hexagonal" || lower == "hexagon_prism") return ShapeKind::Hexagon;
  if (lower == "triangular" || lower == "triangle_prism") return ShapeKind::Triangle;
  throw std::invalid_argument("unknown peg shape: " + std::string(name));
}

/// Prism peg: cross-section polygon scaled to a circumscribed radius.
struct PegShape {
  ShapeKind kind = ShapeKind::Cylinder;
  double radius = 0.01;  // m
};

// Number of segments used for the cylinder's N-gon approximation.
inline constexpr int kCylinderSegments = 16;
inline constexpr double kStarRadiusRatio = 2.5;
inline constexpr double kTrapezoidTopRatio = 0.7;

/// Counter-clockwise outline with circumscribed radius 1, centered on the
/// circumcenter.
inline std::vector<Vec2> unit_outline(ShapeKind kind) {
  std::vector<Vec2> pts;
  auto regular = [&pts](int n, double phase) {
    for (int i = 0; i < n; ++i) {
      const double a = phase + 2.0 * kPi * i / n;
      pts.emplace_back(std::cos(a), std::sin(a));
    }
  };
  switch (kind) {
    case ShapeKind::Cylinder: regular(kCylinderSegments, 0.0); break;
    case ShapeKind::Cuboid: regular(4, kPi / 4); break;
    case ShapeKind::Hexagon: regular(6, 0.0); break;
    case ShapeKind::Triangle: regular(3, kPi / 2); break;
    case ShapeKind::Trapezoid: {
      // Isosceles trapezoids are cyclic, so all four corners sit on the unit
      // circle. Bottom half-width 0.8, top half-width 0.7 * 0.8.
      const double bottom = 0.8;
      const double top = kTrapezoidTopRatio * bottom;
      const double y_bottom = -std::sqrt(1.0 - bottom * bottom);
      const double y_top = std::sqrt(1.0 - top * top);
      pts = {{-bottom, y_bottom}, {bottom, y_bottom}, {top, y_top}, {-top, y_top}};
      break;
    }
    case ShapeKind::Star: {
      const double inner = 1.0 / kStarRadiusRatio;
      for (int i = 0; i < 10; ++i) {
        const double a = kPi / 2 + kPi * i / 5;
        const double r = (i % 2 == 0) ? 1.0 : inner;
        pts.emplace_back(r * std::cos(a), r * std::sin(a));
      }
      break;
    }
  }
  return pts;
}

inline std::vector<Vec2> outline(const PegShape& s) {
  auto pts = unit_outline(s.kind);
  for (auto& p : pts) p *= s.radius;
  return pts;
}

/// Even-odd point-in-polygon test; valid for simple non-convex outlines.
inline bool point_in_polygon(const Vec2& q, const std::vector<Vec2>& poly) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y() > q.y()) != (b.y() > q.y())) {
      const double x = a.x() + (q.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (q.x() < x) inside = !inside;
    }
  }
  return inside;
}

struct BoundaryQuery {
  double distance = std::numeric_limits<double>::infinity();
  Vec2 closest = Vec2::Zero();
};

inline BoundaryQuery closest_on_boundary(const Vec2& q, const std::vector<Vec2>& poly) {
  BoundaryQuery best;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    const Vec2 ab = b - a;
    const double t = std::clamp((q - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    const Vec2 c = a + t * ab;
    const double d = (q - c).norm();
    if (d < best.distance) best = {d, c};
  }
  return best;
}

/// Radius of the largest origin-centered disk contained in the polygon.
inline double inscribed_radius(const std::vector<Vec2>& poly) {
  return closest_on_boundary(Vec2::Zero(), poly).distance;
}

}  // namespace pegcl
