#include "ellipsol/lattice.hpp"

#include "ellipsol/csv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace ellipsol {

Domain Domain::box(const Vec2& lo, const Vec2& hi) {
  require(hi.x() > lo.x() && hi.y() > lo.y(), ErrorKind::InvalidArgument, "box must have positive extent");
  return polygon({lo, {hi.x(), lo.y()}, hi, {lo.x(), hi.y()}});
}

Domain Domain::polygon(std::vector<Vec2> v) {
  require(v.size() >= 3, ErrorKind::InvalidArgument, "polygon needs at least 3 vertices");
  if (polygon_area(v) < 0) std::reverse(v.begin(), v.end());
  require(polygon_area(v) > 0, ErrorKind::InvalidArgument, "polygon has no interior");
  Domain d;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const Vec2& a = v[k];
    const Vec2& b = v[(k + 1) % v.size()];
    const Vec2 e = b - a;
    require(e.norm() > 0, ErrorKind::InvalidArgument, "repeated polygon vertex");
    const Vec2 n = Vec2(e.y(), -e.x()).normalized();
    d.planes_.push_back({n, n.dot(a)});
  }
  for (std::size_t k = 0; k < v.size(); ++k) {
    const Vec2& c = v[(k + 2) % v.size()];
    require(d.planes_[k].normal.dot(c) - d.planes_[k].offset <= 1e-12 * (1 + c.norm()),
            ErrorKind::InvalidArgument, "polygon is not convex");
  }
  d.vertices_ = std::move(v);
  return d;
}

double Domain::signed_distance(const Vec2& p) const {
  double s = -std::numeric_limits<double>::infinity();
  for (const auto& hp : planes_) s = std::max(s, hp.normal.dot(p) - hp.offset);
  return s;
}

double Domain::area() const { return polygon_area(vertices_); }

double Domain::perimeter() const {
  double s = 0;
  for (std::size_t k = 0; k < vertices_.size(); ++k)
    s += (vertices_[(k + 1) % vertices_.size()] - vertices_[k]).norm();
  return s;
}

double Domain::diameter() const {
  double d = 0;
  for (const auto& a : vertices_)
    for (const auto& b : vertices_) d = std::max(d, (a - b).norm());
  return d;
}

double Domain::exit_length(const Vec2& x, const Vec2& v) const {
  double t = std::numeric_limits<double>::infinity();
  for (const auto& hp : planes_) {
    const double nv = hp.normal.dot(v);
    if (nv > 0) t = std::min(t, (hp.offset - hp.normal.dot(x)) / nv);
  }
  return std::max(t, 0.0);
}

namespace {

struct BoundarySample {
  double param;
  Vec2 p;
};

IVec2 bucket_key(const Vec2& p, double bucket) {
  return {int(std::llround(p.x() / bucket)), int(std::llround(p.y() / bucket))};
}

}  // namespace

Lattice Lattice::build(const Domain& domain, double h, const Mat2& basis, const LatticeOptions& options) {
  require(h > 0 && std::isfinite(h), ErrorKind::InvalidArgument, "h must be positive");
  const double detb = basis.determinant();
  require(std::abs(detb) > 1e-12 * basis.squaredNorm(), ErrorKind::InvalidArgument, "degenerate lattice basis");
  require(options.lambda > 0 && options.Lambda >= options.lambda, ErrorKind::InvalidArgument,
          "need 0 < lambda <= Lambda");

  Lattice L;
  L.domain_ = domain;
  L.h_ = h;
  L.basis_ = basis;
  L.basis_inv_ = basis.inverse();
  const double tol = 1e-12 * h;

  const auto& verts = domain.vertices();
  std::vector<Vec2> lat(verts.size());
  Vec2 lo = Vec2::Constant(std::numeric_limits<double>::infinity());
  Vec2 hi = -lo;
  for (std::size_t k = 0; k < verts.size(); ++k) {
    lat[k] = L.basis_inv_ * verts[k] / h;
    lo = lo.cwiseMin(lat[k]);
    hi = hi.cwiseMax(lat[k]);
  }

  for (int j = int(std::floor(lo.y())) - 1; j <= int(std::ceil(hi.y())) + 1; ++j) {
    for (int i = int(std::floor(lo.x())) - 1; i <= int(std::ceil(hi.x())) + 1; ++i) {
      const Vec2 p = L.lattice_point({i, j});
      if (domain.signed_distance(p) < -tol) {
        L.points_.push_back(p);
        L.coords_.push_back({i, j});
      }
    }
  }
  L.num_interior_ = L.points_.size();
  require(L.num_interior_ > 0, ErrorKind::NoInteriorNodes, "no lattice point lies inside the domain");

  // boundary: polygon vertices plus crossings of both lattice line families
  std::vector<BoundarySample> samples;
  double cum = 0;
  for (std::size_t k = 0; k < verts.size(); ++k) {
    const Vec2& a = verts[k];
    const Vec2& b = verts[(k + 1) % verts.size()];
    const Vec2& la = lat[k];
    const Vec2& lb = lat[(k + 1) % verts.size()];
    const double len = (b - a).norm();
    samples.push_back({cum, a});
    for (int f = 0; f < 2; ++f) {
      const double delta = lb[f] - la[f];
      if (std::abs(delta) <= 1e-14 * (1 + la.norm() + lb.norm())) continue;
      const int n_lo = int(std::ceil(std::min(la[f], lb[f]) - 1e-9));
      const int n_hi = int(std::floor(std::max(la[f], lb[f]) + 1e-9));
      for (int n = n_lo; n <= n_hi; ++n) {
        const double s = std::clamp((n - la[f]) / delta, 0.0, 1.0);
        Vec2 c = la + s * (lb - la);
        c[f] = n;
        samples.push_back({cum + s * len, h * (basis * c)});
      }
    }
    cum += len;
  }
  std::stable_sort(samples.begin(), samples.end(),
                   [](const BoundarySample& a, const BoundarySample& b) { return a.param < b.param; });
  const double merge_tol = 1e-9 * h;
  std::vector<Vec2> bnd;
  for (const auto& s : samples) {
    if (!bnd.empty() && (s.p - bnd.back()).norm() <= merge_tol) continue;
    bnd.push_back(s.p);
  }
  while (bnd.size() > 1 && (bnd.back() - bnd.front()).norm() <= merge_tol) bnd.pop_back();

  if (options.densify_boundary) {
    std::vector<Vec2> dense;
    for (std::size_t k = 0; k < bnd.size(); ++k) {
      const Vec2& a = bnd[k];
      const Vec2& b = bnd[(k + 1) % bnd.size()];
      dense.push_back(a);
      const double d = (b - a).norm();
      if (d > h * (1 + 1e-12)) {
        const int pieces = int(std::ceil(d / h - 1e-12));
        for (int t = 1; t < pieces; ++t) dense.push_back(a + (double(t) / pieces) * (b - a));
      }
    }
    bnd.swap(dense);
  }

  for (const auto& p : bnd) {
    const Vec2 c = L.basis_inv_ * p / h;
    const IVec2 r{int(std::lround(c.x())), int(std::lround(c.y()))};
    L.points_.push_back(p);
    L.coords_.push_back((c - r.to_real()).cwiseAbs().maxCoeff() <= 1e-9 ? r : IVec2{kOffLattice, kOffLattice});
  }

  for (std::size_t i = 0; i < L.points_.size(); ++i) {
    if (L.is_lattice_point(i)) L.by_coords_.emplace(L.coords_[i], i);
  }
  L.bucket_ = 1e-6 * h;
  for (std::size_t i = 0; i < L.points_.size(); ++i) L.by_bucket_[bucket_key(L.points_[i], L.bucket_)].push_back(i);

  // cells: parallelotopes centred at the node, clipped by the domain
  std::vector<Vec2> cell = {0.5 * h * (basis * Vec2(-1, -1)), 0.5 * h * (basis * Vec2(1, -1)),
                            0.5 * h * (basis * Vec2(1, 1)), 0.5 * h * (basis * Vec2(-1, 1))};
  if (detb < 0) std::reverse(cell.begin(), cell.end());
  double circum = 0;
  for (const auto& c : cell) circum = std::max(circum, c.norm());
  const double full = h * h * std::abs(detb);
  const ConvexPolygon reference = ConvexPolygon::from_vertices(cell);
  L.cell_measure_.resize(L.num_interior_);
  for (std::size_t i = 0; i < L.num_interior_; ++i) {
    const Vec2& z = L.points_[i];
    if (-domain.signed_distance(z) >= circum) {
      L.cell_measure_[i] = full;
      continue;
    }
    ConvexPolygon poly = reference;
    for (const auto& hp : domain.half_planes()) poly.clip(hp.normal, hp.offset - hp.normal.dot(z), 0);
    L.cell_measure_[i] = poly.area();
  }

  L.sigma_ = 2.0 * std::max(basis.col(0).norm(), basis.col(1).norm()) / std::abs(detb);
  L.r_bar_ = options.Lambda / options.lambda * L.sigma_ * L.sigma_ * (basis.col(0) + basis.col(1)).squaredNorm();
  return L;
}

std::optional<std::size_t> Lattice::node_at(const IVec2& c) const {
  auto it = by_coords_.find(c);
  if (it == by_coords_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Lattice::locate(const Vec2& p) const {
  const IVec2 k = bucket_key(p, bucket_);
  const double tol = 1e-8 * h_;
  std::optional<std::size_t> best;
  double best_d = tol;
  for (int dx = -1; dx <= 1; ++dx) {
    for (int dy = -1; dy <= 1; ++dy) {
      auto it = by_bucket_.find({k.x + dx, k.y + dy});
      if (it == by_bucket_.end()) continue;
      for (auto i : it->second) {
        const double d = (points_[i] - p).norm();
        if (d <= best_d) {
          best_d = d;
          best = i;
        }
      }
    }
  }
  return best;
}

Stencil enumerate_stencil(int m) {
  require(m >= 1, ErrorKind::InvalidArgument, "stencil size must be >= 1");
  Stencil s;
  s.m = m;
  for (int i = -m; i <= m; ++i)
    for (int j = -m; j <= m; ++j)
      if (i != 0 || j != 0) s.directions.push_back({i, j});
  std::stable_sort(s.directions.begin(), s.directions.end(),
                   [](const IVec2& a, const IVec2& b) { return a.norm_inf() < b.norm_inf(); });
  return s;
}

Superbasis canonicalize(const Superbasis& s) {
  static constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  Superbasis best = s;
  bool have = false;
  for (int sign : {1, -1}) {
    for (const auto& p : perms) {
      Superbasis c;
      for (int k = 0; k < 3; ++k) c.y[k] = sign > 0 ? s.y[p[k]] : -s.y[p[k]];
      if (!have || c < best) {
        best = c;
        have = true;
      }
    }
  }
  return best;
}

std::vector<Superbasis> enumerate_superbases(int m) {
  const Stencil st = enumerate_stencil(m);
  std::set<Superbasis> out;
  for (const auto& a : st.directions) {
    for (const auto& b : st.directions) {
      if (std::abs(det(a, b)) != 1) continue;
      const IVec2 c = -(a + b);
      if (c.norm_inf() > m) continue;
      out.insert(canonicalize({{c, a, b}}));
    }
  }
  return {out.begin(), out.end()};
}

std::pair<double, double> shortened_step(const Domain& domain, const Vec2& z, const Vec2& v, double h) {
  require(h > 0, ErrorKind::InvalidArgument, "step must be positive");
  require(v.norm() > 0, ErrorKind::InvalidArgument, "direction must be nonzero");
  auto one = [&](const Vec2& dir) {
    const double t = domain.exit_length(z, dir);
    return t >= h * (1 - 1e-12) ? h : t;
  };
  const double kp = one(v);
  const double km = one(-v);
  require(kp > 0 && km > 0, ErrorKind::NodeNotInterior, "point lies on the boundary");
  return {kp, km};
}

std::pair<double, double> shortened_step(const Lattice& lattice, std::size_t node, const IVec2& y, double h) {
  require(node < lattice.num_nodes() && lattice.is_interior(node), ErrorKind::NodeNotInterior,
          "node " + std::to_string(node) + " is not interior");
  return shortened_step(lattice.domain(), lattice.point(node), lattice.direction(y), h);
}

NodalFunction::NodalFunction(const Lattice& lattice, Eigen::VectorXd values)
    : lattice_(&lattice), values_(std::move(values)) {
  require(std::size_t(values_.size()) == lattice.num_nodes(), ErrorKind::LatticeMismatch,
          "value count does not match node count");
}

NodalFunction NodalFunction::interpolate(const Lattice& lattice, const std::function<double(const Vec2&)>& u) {
  NodalFunction f(lattice);
  for (std::size_t i = 0; i < lattice.num_nodes(); ++i) f[i] = u(lattice.point(i));
  return f;
}

double NodalFunction::at(const Vec2& p) const {
  auto i = lattice_->locate(p);
  if (!i) throw Error(ErrorKind::RequiresInterpolant, "point is not a node");
  return values_[*i];
}

void require_same_lattice(const Lattice& a, const Lattice& b) {
  require(&a == &b, ErrorKind::LatticeMismatch, "operands live on different lattices");
}

void write_lattice_csv(const Lattice& lattice, const std::string& path) {
  CsvWriter w(path, {"node_id", "x", "y", "kind", "cell_measure"});
  for (std::size_t i = 0; i < lattice.num_nodes(); ++i) {
    const Vec2& p = lattice.point(i);
    w.row(i, p.x(), p.y(), lattice.is_interior(i) ? "I" : "B", lattice.cell_measure(i));
  }
}

}  // namespace ellipsol
