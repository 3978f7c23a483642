#include "ellipsol/convexity.hpp"

#include "ellipsol/csv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

namespace ellipsol {

namespace {

SupportPolygon clip_all(std::span<const Vec2> points, std::span<const double> values, std::size_t z,
                        std::span<const std::size_t> candidates, double box_half, int attempts) {
  SupportPolygon out;
  const Vec2& xz = points[z];
  for (int attempt = 0; attempt < attempts; ++attempt) {
    out.polygon.reset_box(Vec2::Zero(), box_half);
    for (auto x : candidates) {
      if (x == z) continue;
      const Vec2 d = points[x] - xz;
      if (d.x() == 0 && d.y() == 0) continue;
      out.polygon.clip(d, values[x] - values[z], int(x));
      if (out.polygon.size() == 0) break;
    }
    out.bounded = !out.polygon.touches_box();
    if (out.bounded || out.polygon.size() == 0) {
      out.bounded = true;
      return out;
    }
    box_half *= 1e3;
  }
  return out;
}

SubdifferentialCell make_cell(const SupportPolygon& sp, std::span<const Vec2> points, std::size_t z) {
  SubdifferentialCell cell;
  cell.node = z;
  cell.bounded = sp.bounded;
  const auto& poly = sp.polygon;
  cell.vertices.assign(poly.vertices().begin(), poly.vertices().end());
  cell.area = poly.area();
  if (poly.size() < 3) return cell;
  std::map<std::size_t, double> sens;
  double dz = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const int label = poly.edge_label(i);
    if (label < 0) continue;
    const double g = poly.edge_length(i) / (points[std::size_t(label)] - points[z]).norm();
    sens[std::size_t(label)] += g;
    dz -= g;
  }
  cell.sensitivities.emplace_back(z, dz);
  for (const auto& kv : sens) cell.sensitivities.push_back(kv);
  return cell;
}

double gradient_bound(const NodalFunction& v, std::size_t z, std::span<const std::size_t> candidates) {
  const Lattice& L = v.lattice();
  double osc = 0;
  for (auto x : candidates) osc = std::max(osc, std::abs(v[x] - v[z]));
  const double r = std::max(std::min(L.distance_to_boundary(z), 0.5 * L.h() * L.basis().colwise().norm().minCoeff()),
                            1e-6 * L.h());
  return 4.0 * (osc + 1e-300) / r;
}

}  // namespace

SupportPolygon support_polygon(std::span<const Vec2> points, std::span<const double> values, std::size_t z,
                               std::span<const std::size_t> candidates, double box_half) {
  return clip_all(points, values, z, candidates, box_half, 4);
}

std::vector<std::vector<std::size_t>> window_neighbors(const Lattice& L, int W) {
  require(W >= 1, ErrorKind::InvalidArgument, "window must be >= 1");
  std::vector<IVec2> offsets;
  for (int i = -W; i <= W; ++i)
    for (int j = -W; j <= W; ++j)
      if (i != 0 || j != 0) offsets.push_back({i, j});
  std::stable_sort(offsets.begin(), offsets.end(), [](const IVec2& a, const IVec2& b) {
    if (a.norm_inf() != b.norm_inf()) return a.norm_inf() < b.norm_inf();
    return a.x * a.x + a.y * a.y < b.x * b.x + b.y * b.y;
  });
  std::vector<std::vector<std::size_t>> out(L.num_interior());
  for (std::size_t z = 0; z < L.num_interior(); ++z)
    for (const auto& o : offsets)
      if (auto n = L.node_at(L.coords(z) + o)) out[z].push_back(*n);

  const Mat2 Binv = L.basis().inverse();
  for (std::size_t b = L.num_interior(); b < L.num_nodes(); ++b) {
    if (L.is_lattice_point(b)) continue;
    const Vec2 c = Binv * L.point(b) / L.h();
    for (int i = int(std::ceil(c.x() - W)); i <= int(std::floor(c.x() + W)); ++i)
      for (int j = int(std::ceil(c.y() - W)); j <= int(std::floor(c.y() + W)); ++j)
        if (auto n = L.node_at({i, j}); n && L.is_interior(*n)) out[*n].push_back(b);
  }
  return out;
}

SubdifferentialCell subdifferential(const NodalFunction& v, std::size_t z, std::span<const std::size_t> candidates) {
  const Lattice& L = v.lattice();
  require(L.is_interior(z), ErrorKind::NodeNotInterior, "subdifferential at a boundary node");
  std::span<const double> vals(v.values().data(), v.size());
  auto sp = clip_all(L.points(), vals, z, candidates, gradient_bound(v, z, candidates), 4);
  return make_cell(sp, L.points(), z);
}

SubdifferentialCell subdifferential_local(const NodalFunction& v, std::size_t z, int window) {
  const Lattice& L = v.lattice();
  require(L.is_interior(z), ErrorKind::NodeNotInterior, "subdifferential at a boundary node");
  require(window >= 1, ErrorKind::InvalidArgument, "window must be >= 1");
  const IVec2 cz = L.coords(z);
  const Mat2 Binv = L.basis().inverse();
  const Vec2& xz = L.point(z);
  // off-lattice boundary nodes by ring
  std::map<int, std::vector<std::size_t>> loose;
  for (std::size_t b = L.num_interior(); b < L.num_nodes(); ++b) {
    if (L.is_lattice_point(b)) continue;
    const Vec2 c = Binv * (L.point(b) - xz) / L.h();
    loose[std::max(1, int(std::ceil(c.cwiseAbs().maxCoeff() - 1e-9)))].push_back(b);
  }
  auto ring = [&](int r, std::vector<std::size_t>& out) {
    for (int i = -r; i <= r; ++i)
      for (int j = -r; j <= r; ++j)
        if (std::max(std::abs(i), std::abs(j)) == r)
          if (auto n = L.node_at(cz + IVec2{i, j})) out.push_back(*n);
    if (auto it = loose.find(r); it != loose.end()) out.insert(out.end(), it->second.begin(), it->second.end());
  };
  std::vector<std::size_t> cand;
  for (int r = 1; r <= window; ++r) ring(r, cand);
  auto cell = subdifferential(v, z, cand);
  const double tol = 1e-12 * (1 + std::abs(v[z]));
  std::vector<std::size_t> next;
  for (int r = window + 1;; ++r) {
    next.clear();
    ring(r, next);
    if (next.empty()) break;
    bool cut = false;
    for (auto x : next) {
      const Vec2 d = L.point(x) - xz;
      for (const auto& p : cell.vertices)
        if (v[x] - v[z] - p.dot(d) < -tol) {
          cut = true;
          break;
        }
      if (cut) break;
    }
    cand.insert(cand.end(), next.begin(), next.end());
    if (!cut) break;
    cell = subdifferential(v, z, cand);
  }
  return cell;
}

SubdifferentialCell subdifferential(const NodalFunction& v, std::size_t z) {
  const Lattice& L = v.lattice();
  require(L.is_interior(z), ErrorKind::NodeNotInterior, "subdifferential at a boundary node");
  // near neighbours first so that the remaining constraints rarely cut
  std::vector<std::size_t> cand;
  cand.reserve(L.num_nodes() + 25);
  for (int i = -2; i <= 2; ++i)
    for (int j = -2; j <= 2; ++j)
      if (auto n = L.node_at(L.coords(z) + IVec2{i, j})) cand.push_back(*n);
  for (std::size_t x = 0; x < L.num_nodes(); ++x) cand.push_back(x);
  return subdifferential(v, z, cand);
}

double DiscreteConvexEnvelope::operator()(const Vec2& x) const {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < plane_gradients.size(); ++k)
    best = std::max(best, plane_gradients[k].dot(x) + plane_intercepts[k]);
  return best;
}

DiscreteConvexEnvelope lower_envelope(std::span<const Vec2> points, std::span<const double> values) {
  const std::size_t n = points.size();
  require(values.size() == n, ErrorKind::InvalidArgument, "points and values differ in length");
  if (n < 3 || convex_hull_indices(points).size() < 3)
    throw Error(ErrorKind::DegenerateHull, "nodes are collinear");

  double vmin = std::numeric_limits<double>::infinity(), vmax = -vmin, vabs = 0;
  for (double x : values) {
    vmin = std::min(vmin, x);
    vmax = std::max(vmax, x);
    vabs = std::max(vabs, std::abs(x));
  }
  double diam = 0, dmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = (points[i] - points[j]).norm();
      diam = std::max(diam, d);
      if (d > 0) dmin = std::min(dmin, d);
    }
  const double osc = vmax - vmin + 1e-12 * (1 + vabs);
  const double box_half = 1e3 * osc / dmin;

  DiscreteConvexEnvelope env;
  std::set<std::vector<std::size_t>> seen;
  std::vector<std::size_t> order(n);
  std::vector<std::size_t> facet;
  std::vector<Vec2> facet_pts;
  for (std::size_t z = 0; z < n; ++z) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return (points[a] - points[z]).squaredNorm() < (points[b] - points[z]).squaredNorm();
    });
    const auto sp = clip_all(points, values, z, order, box_half, 1);
    const auto& poly = sp.polygon;
    const std::size_t m = poly.size();
    for (std::size_t i = 0; i < m; ++i) {
      if (m > 1 && (poly.edge_label((i + m - 1) % m) < 0 || poly.edge_label(i) < 0)) continue;
      const Vec2 p = poly.vertices()[i];
      const double tol = 1e-10 * (osc + p.norm() * diam);
      facet.clear();
      for (std::size_t x = 0; x < n; ++x)
        if (std::abs(values[x] - values[z] - p.dot(points[x] - points[z])) <= tol) facet.push_back(x);
      if (facet.size() < 3 || !seen.insert(facet).second) continue;
      facet_pts.clear();
      for (auto x : facet) facet_pts.push_back(points[x]);
      auto hull = convex_hull_indices(facet_pts);
      if (hull.size() < 3) continue;
      env.plane_gradients.push_back(p);
      env.plane_intercepts.push_back(values[z] - p.dot(points[z]));
      // fan from the lowest node index
      std::rotate(hull.begin(), std::min_element(hull.begin(), hull.end()), hull.end());
      for (std::size_t k = 1; k + 1 < hull.size(); ++k) {
        env.triangles.push_back({facet[hull[0]], facet[hull[k]], facet[hull[k + 1]]});
        env.gradients.push_back(p);
      }
    }
  }
  env.node_values.resize(n);
  for (std::size_t i = 0; i < n; ++i) env.node_values[i] = std::min(env(points[i]), values[i]);
  return env;
}

DiscreteConvexEnvelope lower_envelope(const NodalFunction& v) {
  return lower_envelope(v.lattice().points(), std::span<const double>(v.values().data(), v.size()));
}

std::vector<std::size_t> contact_set(const NodalFunction& v) {
  const auto env = lower_envelope(v);
  const double tol = 1e-12 * (1 + v.sup_norm());
  std::vector<std::size_t> out;
  for (std::size_t z = 0; z < v.lattice().num_interior(); ++z)
    if (std::abs(env.node_values[z] - v[z]) <= tol) out.push_back(z);
  return out;
}

bool is_convex_nodal(const NodalFunction& v) {
  for (std::size_t z = 0; z < v.lattice().num_interior(); ++z)
    if (subdifferential(v, z).vertices.empty()) return false;
  return true;
}

AlexandrovBound alexandrov_bound(const NodalFunction& v) {
  const Lattice& L = v.lattice();
  for (std::size_t b = L.num_interior(); b < L.num_nodes(); ++b)
    require(v[b] >= 0, ErrorKind::BoundaryNotNonnegative,
            "boundary node " + std::to_string(b) + " has value " + std::to_string(v[b]));

  std::vector<Vec2> pts(L.points());
  std::vector<double> vals(L.num_nodes());
  for (std::size_t i = 0; i < L.num_nodes(); ++i) vals[i] = std::min(v[i], 0.0);

  // zero extension to the lattice points of a ball around the domain
  const auto& dv = L.domain().vertices();
  Vec2 c = Vec2::Zero();
  for (const auto& p : dv) c += p;
  c /= double(dv.size());
  double far = 0;
  for (const auto& p : dv) far = std::max(far, (p - c).norm());
  const double R = 1.25 * far + 2 * L.h();
  const Mat2 Binv = L.basis().inverse();
  Vec2 lo = Vec2::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
  for (int sx : {-1, 1})
    for (int sy : {-1, 1}) {
      const Vec2 q = Binv * (c + R * Vec2(sx, sy)) / L.h();
      lo = lo.cwiseMin(q);
      hi = hi.cwiseMax(q);
    }
  for (int j = int(std::floor(lo.y())); j <= int(std::ceil(hi.y())); ++j)
    for (int i = int(std::floor(lo.x())); i <= int(std::ceil(hi.x())); ++i) {
      const Vec2 p = L.lattice_point({i, j});
      if ((p - c).norm() <= R && L.domain().signed_distance(p) > 1e-12 * L.h()) {
        pts.push_back(p);
        vals.push_back(0.0);
      }
    }

  AlexandrovBound out;
  out.radius = R;
  out.lhs = std::max(0.0, -v.values().minCoeff());
  const auto env = lower_envelope(pts, vals);
  const double tol = 1e-12 * (1 + v.sup_norm());
  std::vector<std::size_t> all(pts.size());
  std::iota(all.begin(), all.end(), 0);
  double sum = 0;
  for (std::size_t z = 0; z < L.num_interior(); ++z) {
    if (std::abs(env.node_values[z] - v[z]) > tol) continue;
    out.contact.push_back(z);
    std::vector<std::size_t> order = all;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return (pts[a] - pts[z]).squaredNorm() < (pts[b] - pts[z]).squaredNorm();
    });
    double osc = 0;
    for (double x : vals) osc = std::max(osc, std::abs(x - vals[z]));
    sum += support_polygon(pts, vals, z, order, 4 * (osc + 1e-300) / L.h()).polygon.area();
  }
  out.rhs_raw = std::sqrt(sum);
  return out;
}

void write_envelope_csv(const DiscreteConvexEnvelope& env, const std::string& path) {
  CsvWriter w(path, {"t_id", "v0", "v1", "v2", "gx", "gy"});
  for (std::size_t t = 0; t < env.triangles.size(); ++t)
    w.row(t, env.triangles[t][0], env.triangles[t][1], env.triangles[t][2], env.gradients[t].x(),
          env.gradients[t].y());
}

void write_cell_csv(const SubdifferentialCell& cell, const std::string& path) {
  CsvWriter w(path, {"node_id", "vertex", "px", "py"});
  for (std::size_t k = 0; k < cell.vertices.size(); ++k)
    w.row(cell.node, k, cell.vertices[k].x(), cell.vertices[k].y());
}

}  // namespace ellipsol
