#include "ellipsol/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ellipsol {

ConvexPolygon ConvexPolygon::box(const Vec2& center, double half_width) {
  ConvexPolygon poly;
  poly.reset_box(center, half_width);
  return poly;
}

ConvexPolygon ConvexPolygon::from_vertices(std::vector<Vec2> ccw_vertices) {
  ConvexPolygon poly;
  const std::size_t m = ccw_vertices.size();
  for (std::size_t i = 0; i < m; ++i) {
    const Vec2& p = ccw_vertices[i];
    const Vec2& q = ccw_vertices[(i + 1) % m];
    const Vec2 normal(q.y() - p.y(), p.x() - q.x());
    poly.lines_.push_back({normal, normal.dot(p), kBoxLabel});
    poly.edge_line_.push_back(i);
  }
  poly.vertices_ = std::move(ccw_vertices);
  return poly;
}

void ConvexPolygon::reset_box(const Vec2& c, double r) {
  vertices_ = {{c.x() - r, c.y() - r}, {c.x() + r, c.y() - r}, {c.x() + r, c.y() + r},
               {c.x() - r, c.y() + r}};
  lines_.clear();
  lines_.push_back({Vec2(0, -1), -(c.y() - r), kBoxLabel});
  lines_.push_back({Vec2(1, 0), c.x() + r, kBoxLabel});
  lines_.push_back({Vec2(0, 1), c.y() + r, kBoxLabel});
  lines_.push_back({Vec2(-1, 0), -(c.x() - r), kBoxLabel});
  edge_line_ = {0, 1, 2, 3};
}

Vec2 ConvexPolygon::intersect(std::size_t a, std::size_t b, const Vec2& p, const Vec2& q,
                              double sp, double sq) const {
  const Line& la = lines_[a];
  const Line& lb = lines_[b];
  const double d = cross(la.normal, lb.normal);
  if (std::abs(d) <= 1e-14 * la.normal.norm() * lb.normal.norm()) {
    const double t = sp / (sp - sq);
    return p + t * (q - p);
  }
  return {(la.offset * lb.normal.y() - la.normal.y() * lb.offset) / d,
          (la.normal.x() * lb.offset - la.offset * lb.normal.x()) / d};
}

void ConvexPolygon::clip(const Vec2& normal, double offset, int label) {
  const std::size_t m = vertices_.size();
  if (m == 0) return;
  side_.resize(m);
  const double nn = normal.norm();
  bool any_out = false;
  bool all_out = true;
  for (std::size_t i = 0; i < m; ++i) {
    const double s = normal.dot(vertices_[i]) - offset;
    const double tol = 1e-12 * (nn * vertices_[i].norm() + std::abs(offset)) + 1e-300;
    // vertices within tolerance of the line count as inside
    side_[i] = s > tol ? s : std::min(s, 0.0);
    if (s > tol) any_out = true;
    else all_out = false;
  }
  if (!any_out) return;
  if (all_out) {
    vertices_.clear();
    edge_line_.clear();
    return;
  }

  lines_.push_back({normal, offset, label});
  const std::size_t c = lines_.size() - 1;
  next_vertices_.clear();
  next_edges_.clear();
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = (i + 1) % m;
    const bool in_i = side_[i] <= 0;
    const bool in_j = side_[j] <= 0;
    const std::size_t edge = edge_line_[i];
    if (in_i) {
      next_vertices_.push_back(vertices_[i]);
      next_edges_.push_back(edge);
      if (!in_j) {
        next_vertices_.push_back(intersect(edge, c, vertices_[i], vertices_[j], side_[i], side_[j]));
        next_edges_.push_back(c);
      }
    } else if (in_j) {
      next_vertices_.push_back(intersect(edge, c, vertices_[i], vertices_[j], side_[i], side_[j]));
      next_edges_.push_back(edge);
    }
  }
  vertices_.swap(next_vertices_);
  edge_line_.swap(next_edges_);
  drop_duplicates();
}

void ConvexPolygon::drop_duplicates() {
  if (vertices_.size() < 2) return;
  double scale = 0;
  for (const auto& v : vertices_) scale = std::max(scale, v.cwiseAbs().maxCoeff());
  // relative to the pair, with a small floor tied to the overall size
  auto same = [&](const Vec2& a, const Vec2& b) {
    const double eps = 1e-13 * (a.cwiseAbs().maxCoeff() + b.cwiseAbs().maxCoeff()) + 1e-18 * scale + 1e-300;
    return (a - b).cwiseAbs().maxCoeff() <= eps;
  };
  next_vertices_.clear();
  next_edges_.clear();
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    if (!next_vertices_.empty() && same(vertices_[i], next_vertices_.back())) {
      next_edges_.back() = edge_line_[i];
      continue;
    }
    next_vertices_.push_back(vertices_[i]);
    next_edges_.push_back(edge_line_[i]);
  }
  while (next_vertices_.size() > 1 && same(next_vertices_.back(), next_vertices_.front())) {
    next_vertices_.pop_back();
    next_edges_.pop_back();
  }
  vertices_.swap(next_vertices_);
  edge_line_.swap(next_edges_);
}

double ConvexPolygon::area() const {
  if (vertices_.size() < 3) return 0.0;
  return std::max(0.0, polygon_area(vertices_));
}

Vec2 ConvexPolygon::centroid() const {
  if (vertices_.empty()) return Vec2::Zero();
  if (vertices_.size() < 3) {
    Vec2 sum = Vec2::Zero();
    for (const auto& v : vertices_) sum += v;
    return sum / double(vertices_.size());
  }
  const Vec2 o = vertices_[0];
  double a2 = 0;
  Vec2 acc = Vec2::Zero();
  for (std::size_t i = 1; i + 1 < vertices_.size(); ++i) {
    const Vec2 p = vertices_[i] - o;
    const Vec2 q = vertices_[i + 1] - o;
    const double w = cross(p, q);
    a2 += w;
    acc += w * (p + q) / 3.0;
  }
  if (a2 == 0) return o;
  return o + acc / a2;
}

bool ConvexPolygon::contains(const Vec2& p, double tol) const {
  const std::size_t m = vertices_.size();
  if (m == 0) return false;
  if (m == 1) return (p - vertices_[0]).norm() <= tol;
  for (std::size_t i = 0; i < m; ++i) {
    const Vec2& a = vertices_[i];
    const Vec2& b = vertices_[(i + 1) % m];
    const Vec2 e = b - a;
    const double len = e.norm();
    if (len == 0) continue;
    if (cross(e, p - a) / len < -tol) return false;
  }
  return true;
}

bool ConvexPolygon::touches_box() const {
  for (std::size_t i = 0; i < edge_line_.size(); ++i) {
    if (lines_[edge_line_[i]].label == kBoxLabel && edge_length(i) > 0) return true;
  }
  return false;
}

double polygon_area(std::span<const Vec2> v) {
  if (v.size() < 3) return 0.0;
  const Vec2 o = v[0];
  double a2 = 0;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) a2 += cross(v[i] - o, v[i + 1] - o);
  return 0.5 * a2;
}

std::vector<std::size_t> convex_hull_indices(std::span<const Vec2> pts) {
  std::vector<std::size_t> idx(pts.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (pts[a].x() != pts[b].x()) return pts[a].x() < pts[b].x();
    return pts[a].y() < pts[b].y();
  });
  if (idx.size() < 3) return idx;
  double scale = 0;
  for (const auto& p : pts) scale = std::max(scale, p.cwiseAbs().maxCoeff());
  const double eps = 1e-12 * scale * scale;
  std::vector<std::size_t> hull(2 * idx.size());
  std::size_t k = 0;
  auto turn = [&](std::size_t o, std::size_t a, std::size_t b) {
    return cross(pts[a] - pts[o], pts[b] - pts[o]);
  };
  for (std::size_t i = 0; i < idx.size(); ++i) {
    while (k >= 2 && turn(hull[k - 2], hull[k - 1], idx[i]) <= eps) --k;
    hull[k++] = idx[i];
  }
  for (std::size_t i = idx.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && turn(hull[k - 2], hull[k - 1], idx[i]) <= eps) --k;
    hull[k++] = idx[i];
  }
  hull.resize(k - 1);
  return hull;
}

std::vector<Vec2> convex_hull(std::vector<Vec2> points) {
  const auto idx = convex_hull_indices(points);
  std::vector<Vec2> hull;
  hull.reserve(idx.size());
  for (auto i : idx) hull.push_back(points[i]);
  return hull;
}

ConvexPolygon minkowski_sum(const ConvexPolygon& a, const ConvexPolygon& b) {
  if (a.size() == 0 || b.size() == 0) return {};
  std::vector<Vec2> sums;
  sums.reserve(a.size() * b.size());
  for (const auto& p : a.vertices())
    for (const auto& q : b.vertices()) sums.push_back(p + q);
  auto hull = convex_hull(std::move(sums));
  return ConvexPolygon::from_vertices(std::move(hull));
}

}  // namespace ellipsol
