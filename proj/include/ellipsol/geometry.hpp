#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace ellipsol {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Integer lattice direction, in coordinates of the lattice basis.
struct IVec2 {
  int x = 0;
  int y = 0;

  friend bool operator==(const IVec2&, const IVec2&) = default;
  friend auto operator<=>(const IVec2&, const IVec2&) = default;
  IVec2 operator-() const { return {-x, -y}; }
  IVec2 operator+(const IVec2& o) const { return {x + o.x, y + o.y}; }
  IVec2 operator-(const IVec2& o) const { return {x - o.x, y - o.y}; }
  int norm_inf() const { return std::max(std::abs(x), std::abs(y)); }
  Vec2 to_real() const { return {double(x), double(y)}; }
};

inline long det(const IVec2& a, const IVec2& b) { return long(a.x) * b.y - long(a.y) * b.x; }
inline double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

struct IVec2Hash {
  std::size_t operator()(const IVec2& v) const noexcept {
    return std::hash<std::int64_t>()((std::int64_t(v.x) << 32) ^ std::uint32_t(v.y));
  }
};

/// Convex polygon built by successive half-plane clipping. Each edge remembers
/// the label of the constraint line it lies on, so callers can recover which
/// constraints are active and how long their facets are.
class ConvexPolygon {
 public:
  static constexpr int kBoxLabel = -1;

  ConvexPolygon() = default;

  /// Axis-aligned square [c - r, c + r]^2 whose edges carry kBoxLabel.
  static ConvexPolygon box(const Vec2& center, double half_width);
  static ConvexPolygon from_vertices(std::vector<Vec2> ccw_vertices);

  void reset_box(const Vec2& center, double half_width);

  /// Keep the part with normal.dot(p) <= offset.
  void clip(const Vec2& normal, double offset, int label);

  bool empty() const { return vertices_.size() < 3; }
  double area() const;
  Vec2 centroid() const;
  bool contains(const Vec2& p, double tol = 1e-12) const;

  std::span<const Vec2> vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }
  /// Label of the edge from vertex i to vertex i+1.
  int edge_label(std::size_t i) const { return lines_[edge_line_[i]].label; }
  double edge_length(std::size_t i) const {
    return (vertices_[(i + 1) % vertices_.size()] - vertices_[i]).norm();
  }
  bool touches_box() const;

 private:
  struct Line {
    Vec2 normal;
    double offset;
    int label;
  };

  Vec2 intersect(std::size_t line_a, std::size_t line_b, const Vec2& fallback_p,
                 const Vec2& fallback_q, double sp, double sq) const;
  void drop_duplicates();

  std::vector<Vec2> vertices_;
  std::vector<std::size_t> edge_line_;
  std::vector<Line> lines_;
  // scratch buffers reused between clips
  std::vector<Vec2> next_vertices_;
  std::vector<std::size_t> next_edges_;
  std::vector<double> side_;
};

/// Shoelace area of a simple polygon given in order (CCW positive).
double polygon_area(std::span<const Vec2> vertices);

/// Andrew's monotone chain. Returns CCW hull without collinear points.
std::vector<Vec2> convex_hull(std::vector<Vec2> points);

/// Indices of the strict convex hull of `points`, CCW.
std::vector<std::size_t> convex_hull_indices(std::span<const Vec2> points);

ConvexPolygon minkowski_sum(const ConvexPolygon& a, const ConvexPolygon& b);

}  // namespace ellipsol
