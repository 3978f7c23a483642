#include "ellipsol/monge_ampere.hpp"

#include "ellipsol/csv.hpp"
#include "ellipsol/log.hpp"
#include "ellipsol/parallel.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

namespace ellipsol {

// ---------------------------------------------------------------- problem

MAProblem MAProblem::with_density(const Lattice& L, ScalarField f, ScalarField g, Quadrature q) {
  require(bool(f) && bool(g), ErrorKind::InvalidArgument, "density and boundary data are required");
  MAProblem p;
  p.lattice = &L;
  p.density = std::move(f);
  p.boundary = std::move(g);
  const std::size_t ni = L.num_interior();
  p.mass.resize(static_cast<Eigen::Index>(ni));
  // 3-point Gauss-Legendre on [-1/2, 1/2]
  const double gx[3] = {-0.5 * std::sqrt(0.6), 0.0, 0.5 * std::sqrt(0.6)};
  const double gw[3] = {5.0 / 18, 8.0 / 18, 5.0 / 18};
  const double full = L.h() * L.h() * std::abs(L.basis().determinant());
  for (std::size_t i = 0; i < ni; ++i) {
    const Vec2& x = L.point(i);
    double m = 0;
    if (q == Quadrature::Centroid) {
      m = p.density(x) * L.cell_measure(i);
    } else {
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          const Vec2 y = x + L.h() * (L.basis() * Vec2(gx[a], gx[b]));
          if (L.domain().signed_distance(y) <= 0) m += gw[a] * gw[b] * p.density(y);
        }
      m *= full;
    }
    require(m >= 0, ErrorKind::InvalidArgument, "density must be nonnegative");
    p.mass[static_cast<Eigen::Index>(i)] = m;
  }
  return p;
}

MAProblem MAProblem::with_point_masses(const Lattice& L, const std::vector<std::pair<std::size_t, double>>& masses,
                                       ScalarField g) {
  require(bool(g), ErrorKind::InvalidArgument, "boundary data is required");
  MAProblem p;
  p.lattice = &L;
  p.boundary = std::move(g);
  p.mass = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(L.num_interior()));
  for (const auto& [node, m] : masses) {
    require(L.is_interior(node), ErrorKind::NodeNotInterior, "point mass must sit on an interior node");
    require(m >= 0, ErrorKind::InvalidArgument, "point masses must be nonnegative");
    p.mass[static_cast<Eigen::Index>(node)] += m;
  }
  return p;
}

double MAProblem::density_at(std::size_t node) const {
  if (density) return density(lattice->point(node));
  return mass[static_cast<Eigen::Index>(node)] / lattice->cell_measure(node);
}

NodalFunction MAProblem::with_boundary(const Eigen::VectorXd& interior) const { return to_nodal(*lattice, interior, boundary); }

namespace {

double sup_abs(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

void fill_boundary_residual(const MAProblem& p, const NodalFunction& u, Eigen::VectorXd& r) {
  const Lattice& L = *p.lattice;
  for (std::size_t i = L.num_interior(); i < L.num_nodes(); ++i)
    r[static_cast<Eigen::Index>(i)] = u[i] - p.boundary(L.point(i));
}

Eigen::VectorXd solve_sparse(const std::vector<Eigen::Triplet<double>>& trip, Eigen::Index n, const Eigen::VectorXd& rhs,
                             bool* ok) {
  Eigen::SparseMatrix<double> J(n, n);
  J.setFromTriplets(trip.begin(), trip.end());
  J.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(J);
  *ok = lu.info() == Eigen::Success;
  if (!*ok) return {};
  Eigen::VectorXd d = lu.solve(rhs);
  *ok = lu.info() == Eigen::Success && d.allFinite();
  return d;
}

}  // namespace

// ---------------------------------------------------------------- subdifferential scheme

namespace {

struct OpEval {
  Eigen::VectorXd area;
  std::vector<char> nonempty;
  std::vector<Eigen::Triplet<double>> jac;
};

class OpCandidates {
 public:
  OpCandidates(const Lattice&, int window) : window_(window) {}
  SubdifferentialCell cell(const NodalFunction& u, std::size_t z) const {
    if (window_ <= 0) return subdifferential(u, z);
    return subdifferential_local(u, z, window_);
  }

 private:
  int window_;
};

OpEval op_eval(const MAProblem& p, const NodalFunction& u, const OpCandidates& cand, bool jacobian) {
  const Lattice& L = *p.lattice;
  const std::size_t ni = L.num_interior();
  OpEval e;
  e.area.resize(static_cast<Eigen::Index>(ni));
  e.nonempty.assign(ni, 0);
  std::vector<std::vector<std::pair<std::size_t, double>>> sens(jacobian ? ni : 0);
  parallel_for(ni, [&](std::size_t z) {
    auto c = cand.cell(u, z);
    e.area[static_cast<Eigen::Index>(z)] = c.area;
    e.nonempty[z] = !c.vertices.empty();
    if (jacobian) sens[z] = std::move(c.sensitivities);
  });
  if (jacobian)
    for (std::size_t z = 0; z < ni; ++z)
      for (const auto& [x, d] : sens[z])
        if (L.is_interior(x)) e.jac.emplace_back(int(z), int(x), d);
  return e;
}

void check_convex_boundary(const MAProblem& p) {
  const Lattice& L = *p.lattice;
  std::vector<Vec2> pts;
  std::vector<double> vals;
  double scale = 1;
  for (std::size_t i = L.num_interior(); i < L.num_nodes(); ++i) {
    pts.push_back(L.point(i));
    vals.push_back(p.boundary(L.point(i)));
    scale = std::max(scale, std::abs(vals.back()));
  }
  const auto env = lower_envelope(pts, vals);
  for (std::size_t i = 0; i < vals.size(); ++i)
    if (vals[i] - env.node_values[i] > 1e-9 * scale)
      throw Error(ErrorKind::NoConvexSubsolution, "boundary data is not the trace of a convex function");
}

// K (|x - c|^2 - R^2) + min g inside, g on the boundary; lies below g when R bounds the domain.
NodalFunction paraboloid_guess(const MAProblem& p, double K) {
  const Lattice& L = *p.lattice;
  const auto& verts = L.domain().vertices();
  Vec2 c = Vec2::Zero();
  for (const auto& v : verts) c += v;
  c /= double(verts.size());
  double R2 = 0;
  for (const auto& v : verts) R2 = std::max(R2, (v - c).squaredNorm());
  double gmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = L.num_interior(); i < L.num_nodes(); ++i) gmin = std::min(gmin, p.boundary(L.point(i)));
  const std::size_t ni = L.num_interior();
  Eigen::VectorXd x(static_cast<Eigen::Index>(ni));
  for (std::size_t i = 0; i < ni; ++i) x[static_cast<Eigen::Index>(i)] = K * ((L.point(i) - c).squaredNorm() - R2) + gmin;
  return p.with_boundary(x);
}

}  // namespace

Eigen::VectorXd op_residual(const MAProblem& p, const NodalFunction& u, int window) {
  require_same_lattice(*p.lattice, u.lattice());
  OpCandidates cand(*p.lattice, window);
  const auto e = op_eval(p, u, cand, false);
  Eigen::VectorXd r(static_cast<Eigen::Index>(p.lattice->num_nodes()));
  r.head(e.area.size()) = e.area - p.mass;
  fill_boundary_residual(p, u, r);
  return r;
}

NodalFunction op_initial_guess(const MAProblem& p, int window) {
  check_convex_boundary(p);
  OpCandidates cand(*p.lattice, window);
  double K = 1;
  for (int attempt = 0; attempt < 80; ++attempt, K *= 2) {
    NodalFunction u = paraboloid_guess(p, K);
    const auto e = op_eval(p, u, cand, false);
    if ((e.area.array() >= p.mass.array()).all()) return u;
  }
  throw Error(ErrorKind::NoConvexSubsolution, "no paraboloid carries the target masses");
}

NodalFunction op_solve(const MAProblem& p, const OpOptions& opt, MASolveInfo* info) {
  const Lattice& L = *p.lattice;
  const Eigen::Index ni = static_cast<Eigen::Index>(L.num_interior());
  const double h2 = L.h() * L.h() * std::abs(L.basis().determinant());
  NodalFunction u = op_initial_guess(p, opt.window);
  OpCandidates cand(L, opt.window);

  Eigen::VectorXd cells(ni);
  for (Eigen::Index i = 0; i < ni; ++i) cells[i] = L.cell_measure(std::size_t(i));
  const double mean_density = std::max(p.mass.sum() / cells.sum(), 1e-300);
  const double min_density = (p.mass.array() / cells.array()).minCoeff();

  // Zero or tiny masses make the Jacobian singular; approach them through a decreasing mass floor.
  std::vector<double> floors;
  if (min_density < 1e-3 * mean_density)
    for (double eps = 1e-1; eps >= 1e-10 * 0.99; eps *= 0.1) floors.push_back(eps * mean_density);
  else
    floors.push_back(0);

  auto weight = [&](const Eigen::VectorXd& target) {
    Eigen::VectorXd w(ni);
    for (Eigen::Index i = 0; i < ni; ++i) w[i] = std::max(target[i], h2);
    return w;
  };
  const Eigen::VectorXd w_true = weight(p.mass);

  int total = 0;
  for (std::size_t s = 0; s < floors.size(); ++s) {
    const bool last = s + 1 == floors.size();
    const Eigen::VectorXd target = p.mass.cwiseMax(floors[s] * cells);
    const Eigen::VectorXd w = weight(target);
    const double stage_tol = last ? opt.rtol : std::max(opt.rtol, 1e-4);
    auto e = op_eval(p, u, cand, true);
    Eigen::VectorXd R = e.area - target;
    for (int it = 0;; ++it, ++total) {
      if ((R.cwiseAbs().array() <= stage_tol * w.array()).all()) break;
      log_debug("op stage " + std::to_string(s) + " newton " + std::to_string(it) + " residual " +
                format_double(sup_abs(R)));
      if (it >= opt.max_newton)
        throw Error(ErrorKind::NoConvergence, "subdifferential Newton iteration hit its cap of " +
                                                  std::to_string(opt.max_newton));
      bool ok = false;
      Eigen::VectorXd d = solve_sparse(e.jac, ni, -R, &ok);
      if (!ok) {
        auto jac = e.jac;
        for (Eigen::Index i = 0; i < ni; ++i) jac.emplace_back(int(i), int(i), -1e-10);
        d = solve_sparse(jac, ni, -R, &ok);
        require(ok, ErrorKind::SingularSystem, "subdifferential Jacobian is singular");
      }
      const double merit = R.norm();
      double t = 1;
      for (;; t *= 0.5) {
        require(t > 1e-12, ErrorKind::NoConvergence, "line search stalled in the subdifferential Newton iteration");
        NodalFunction trial = u;
        trial.values().head(ni) += t * d;
        auto et = op_eval(p, trial, cand, true);
        bool convex = true;
        for (Eigen::Index i = 0; i < ni; ++i) convex = convex && (et.nonempty[std::size_t(i)] || target[i] == 0);
        const Eigen::VectorXd Rt = et.area - target;
        if (convex && Rt.norm() <= (1 - 1e-4 * t) * merit) {
          u = std::move(trial);
          e = std::move(et);
          R = Rt;
          break;
        }
      }
    }
  }
  const Eigen::VectorXd Rtrue = op_eval(p, u, cand, false).area - p.mass;
  const double worst = (Rtrue.cwiseAbs().array() / w_true.array()).maxCoeff();
  if (info) *info = {total, worst, "newton"};
  if (worst > opt.rtol)
    throw Error(ErrorKind::NoConvergence, "subdifferential residual " + format_double(worst) + " above tolerance");
  return u;
}

NodalFunction op_gauss_seidel(const MAProblem& p, NodalFunction u, const OpOptions& opt, int max_sweeps,
                              MASolveInfo* info) {
  const Lattice& L = *p.lattice;
  require_same_lattice(L, u.lattice());
  const std::size_t ni = L.num_interior();
  const double h2 = L.h() * L.h() * std::abs(L.basis().determinant());
  OpCandidates cand(L, opt.window);
  const double scale = 1 + u.sup_norm();

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double change = 0;
    for (std::size_t z = 0; z < ni; ++z) {
      const double target = p.mass[static_cast<Eigen::Index>(z)];
      auto fits = [&](double s) {
        u[z] = s;
        const auto c = cand.cell(u, z);
        return !c.vertices.empty() && c.area >= target;
      };
      const double old = u[z];
      double lo = old, hi = old, step = std::max(1e-3 * scale, 1e-12);
      if (fits(old)) {
        for (hi = old + step; fits(hi); step *= 2) lo = hi, hi += step;
      } else {
        for (lo = old - step; !fits(lo); step *= 2) hi = lo, lo -= step;
      }
      for (int b = 0; b < 200 && hi - lo > 1e-15 * scale; ++b) {
        const double mid = 0.5 * (lo + hi);
        (fits(mid) ? lo : hi) = mid;
      }
      u[z] = lo;
      change = std::max(change, std::abs(lo - old));
    }
    if (change <= 1e-12 * scale) {
      const Eigen::VectorXd r = op_residual(p, u, opt.window).head(static_cast<Eigen::Index>(ni));
      double worst = 0;
      for (std::size_t z = 0; z < ni; ++z)
        worst = std::max(worst, std::abs(r[static_cast<Eigen::Index>(z)]) / std::max(p.mass[static_cast<Eigen::Index>(z)], h2));
      if (info) *info = {sweep + 1, worst, "gauss-seidel"};
      return u;
    }
  }
  throw Error(ErrorKind::NoConvergence, "subdifferential sweeps hit their cap of " + std::to_string(max_sweeps));
}

// ---------------------------------------------------------------- superbasis scheme

double bcm_gamma(double d0, double d1, double d2) {
  const double d[3] = {d0, d1, d2};
  for (int i = 0; i < 3; ++i)
    if (d[i] >= d[(i + 1) % 3] + d[(i + 2) % 3]) return d[(i + 1) % 3] * d[(i + 2) % 3];
  return 0.5 * (d0 * d1 + d1 * d2 + d0 * d2) - 0.25 * (d0 * d0 + d1 * d1 + d2 * d2);
}

namespace {

// gamma at the positive parts, with its gradient (zero on clamped entries).
double gamma_plus(const double raw[3], double grad[3]) {
  double d[3];
  for (int i = 0; i < 3; ++i) d[i] = std::max(raw[i], 0.0);
  double g[3];
  double value = 0;
  int branch = -1;
  for (int i = 0; i < 3 && branch < 0; ++i)
    if (d[i] >= d[(i + 1) % 3] + d[(i + 2) % 3]) branch = i;
  if (branch >= 0) {
    const int j = (branch + 1) % 3, k = (branch + 2) % 3;
    value = d[j] * d[k];
    g[branch] = 0, g[j] = d[k], g[k] = d[j];
  } else {
    value = 0.5 * (d[0] * d[1] + d[1] * d[2] + d[0] * d[2]) - 0.25 * (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    for (int i = 0; i < 3; ++i) g[i] = 0.5 * (d[(i + 1) % 3] + d[(i + 2) % 3] - d[i]);
  }
  for (int i = 0; i < 3; ++i) grad[i] = raw[i] > 0 ? g[i] : 0.0;
  return value;
}

struct Row {
  std::vector<std::pair<std::size_t, double>> coeffs;
  double constant = 0;
  double eval(const NodalFunction& u) const {
    double s = constant;
    for (const auto& [i, c] : coeffs) s += c * u[i];
    return s;
  }
  double diagonal(std::size_t z) const {
    double s = 0;
    for (const auto& [i, c] : coeffs)
      if (i == z) s += c;
    return s;
  }
};

Row to_row(const LinearRow& r) {
  Row out;
  out.constant = r.constant;
  std::map<std::size_t, double> merged;
  for (const auto& [i, c] : r.coeffs) merged[i] += c;
  out.coeffs.assign(merged.begin(), merged.end());
  return out;
}

// Scaled second differences along every superbasis member at every interior node.
class BcmStencil {
 public:
  BcmStencil(const MAProblem& p, int m) : bases_(enumerate_superbases(m)) {
    const Lattice& L = *p.lattice;
    const std::size_t ni = L.num_interior();
    rows_.resize(ni * bases_.size() * 3);
    parallel_for(ni, [&](std::size_t z) {
      LinearRow r;
      for (std::size_t b = 0; b < bases_.size(); ++b)
        for (int i = 0; i < 3; ++i) {
          r.coeffs.clear();
          r.constant = 0;
          add_second_difference(L, z, L.direction(bases_[b].y[std::size_t(i)]), L.h(), 1.0, p.boundary, false, r);
          rows_[(z * bases_.size() + b) * 3 + std::size_t(i)] = to_row(r);
        }
    });
  }
  std::size_t num_bases() const { return bases_.size(); }
  const Row& row(std::size_t z, std::size_t b, int i) const { return rows_[(z * bases_.size() + b) * 3 + std::size_t(i)]; }

 private:
  std::vector<Superbasis> bases_;
  std::vector<Row> rows_;
};

struct BcmNode {
  double value = 0;
  std::size_t active = 0;
  double grad[3] = {0, 0, 0};
};

BcmNode bcm_node(const BcmStencil& st, const NodalFunction& u, std::size_t z) {
  BcmNode best;
  best.value = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < st.num_bases(); ++b) {
    double d[3], g[3];
    for (int i = 0; i < 3; ++i) d[i] = st.row(z, b, i).eval(u);
    const double v = gamma_plus(d, g);
    if (v < best.value) {
      best.value = v;
      best.active = b;
      std::copy(g, g + 3, best.grad);
    }
  }
  return best;
}

Eigen::VectorXd bcm_eval(const MAProblem& p, const BcmStencil& st, const Eigen::VectorXd& f, const NodalFunction& u,
                         std::vector<Eigen::Triplet<double>>* jac) {
  const Lattice& L = *p.lattice;
  const std::size_t ni = L.num_interior();
  Eigen::VectorXd R(static_cast<Eigen::Index>(ni));
  std::vector<BcmNode> nodes(ni);
  parallel_for(ni, [&](std::size_t z) {
    nodes[z] = bcm_node(st, u, z);
    R[static_cast<Eigen::Index>(z)] = nodes[z].value - f[static_cast<Eigen::Index>(z)];
  });
  if (jac) {
    jac->clear();
    for (std::size_t z = 0; z < ni; ++z) {
      const auto& n = nodes[z];
      double gsum = n.grad[0] + n.grad[1] + n.grad[2];
      // keep the row nonsingular where every difference is clamped
      const double reg = gsum > 0 ? 0.0 : 1e-6 * (1 + std::abs(f[static_cast<Eigen::Index>(z)]));
      for (int i = 0; i < 3; ++i)
        for (const auto& [x, c] : st.row(z, n.active, i).coeffs)
          if (L.is_interior(x)) jac->emplace_back(int(z), int(x), (n.grad[i] + reg) * c);
    }
  }
  return R;
}

Eigen::VectorXd bcm_density(const MAProblem& p) {
  const std::size_t ni = p.lattice->num_interior();
  Eigen::VectorXd f(static_cast<Eigen::Index>(ni));
  for (std::size_t z = 0; z < ni; ++z) f[static_cast<Eigen::Index>(z)] = p.density_at(z);
  return f;
}

}  // namespace

Eigen::VectorXd bcm_residual(const MAProblem& p, const NodalFunction& u, int m) {
  require_same_lattice(*p.lattice, u.lattice());
  BcmStencil st(p, m);
  const Eigen::VectorXd R = bcm_eval(p, st, bcm_density(p), u, nullptr);
  Eigen::VectorXd r(static_cast<Eigen::Index>(p.lattice->num_nodes()));
  r.head(R.size()) = R;
  fill_boundary_residual(p, u, r);
  return r;
}

NodalFunction bcm_solve(const MAProblem& p, const BcmOptions& opt, MASolveInfo* info) {
  const Lattice& L = *p.lattice;
  const Eigen::Index ni = static_cast<Eigen::Index>(L.num_interior());
  const Eigen::VectorXd f = bcm_density(p);
  require((f.array() >= 0).all(), ErrorKind::InvalidArgument, "density must be nonnegative");
  const double tol = opt.tol * (1 + sup_abs(f));
  BcmStencil st(p, opt.m);

  // Vanishing density leaves the equation degenerate (any clamped difference solves it);
  // a decreasing density floor selects the largest solution, as for the subdifferential scheme.
  const double mean = f.size() ? f.mean() : 0.0;
  const double ref = std::max(mean, 1.0);
  std::vector<double> floors;
  if (f.size() && f.minCoeff() < 1e-3 * ref)
    for (double eps = 1e-1; eps >= 1e-10 * 0.99; eps *= 0.1) floors.push_back(eps * ref);
  else
    floors.push_back(0);

  NodalFunction u;
  if (floors.size() == 1) {
    // Laplacian of the solution dominates 2 sqrt(det); that Poisson problem gives a convex start.
    auto lap = assemble_linear(
        L, [](const Vec2&) { return Mat2::Identity(); },
        [&](const Vec2& x) { return 2.0 * std::sqrt(std::max(p.density ? p.density(x) : 0.0, 0.0)); }, p.boundary,
        1);
    Eigen::VectorXd src = lap.source();
    if (!p.density)
      for (Eigen::Index i = 0; i < ni; ++i) src[i] = 2.0 * std::sqrt(f[i]);
    PositiveLinearOperator op(L, lap.all_terms(), src, p.boundary);
    u = solve_monotone_linear(op);
  } else {
    // harmonic starts are not convex when the density vanishes; use a steep paraboloid instead
    const Eigen::VectorXd first = f.cwiseMax(floors.front());
    for (double K = 1;; K *= 2) {
      require(K < 1e30, ErrorKind::NoConvexSubsolution, "no paraboloid reaches the target density");
      u = paraboloid_guess(p, K);
      if ((bcm_eval(p, st, first, u, nullptr).array() >= 0).all()) break;
    }
  }

  int it = 0;
  Eigen::VectorXd R;
  for (std::size_t s = 0; s < floors.size(); ++s) {
    const Eigen::VectorXd target = f.cwiseMax(floors[s]);
    const double stage_tol = s + 1 == floors.size() ? 0.5 * tol : std::max(tol, 1e-4 * ref);
    std::vector<Eigen::Triplet<double>> jac;
    R = bcm_eval(p, st, target, u, &jac);
    for (int local = 0; sup_abs(R) > stage_tol; ++it, ++local) {
      if (local >= opt.max_newton)
        throw Error(ErrorKind::NoConvergence,
                    "superbasis Newton iteration hit its cap of " + std::to_string(opt.max_newton));
      bool ok = false;
      const Eigen::VectorXd d = solve_sparse(jac, ni, -R, &ok);
      require(ok, ErrorKind::SingularSystem, "superbasis Jacobian is singular");
      log_debug("bcm stage " + std::to_string(s) + " newton " + std::to_string(local) + " residual " +
                format_double(sup_abs(R)));
      const double merit = R.norm();
      for (double t = 1;; t *= 0.5) {
        require(t > 1e-12, ErrorKind::NoConvergence, "line search stalled in the superbasis Newton iteration");
        NodalFunction trial = u;
        trial.values().head(ni) += t * d;
        std::vector<Eigen::Triplet<double>> jt;
        Eigen::VectorXd Rt = bcm_eval(p, st, target, trial, &jt);
        if (Rt.norm() <= (1 - 1e-4 * t) * merit) {
          u = std::move(trial);
          R = std::move(Rt);
          jac = std::move(jt);
          break;
        }
      }
    }
  }
  R = bcm_eval(p, st, f, u, nullptr);
  if (sup_abs(R) > tol)
    throw Error(ErrorKind::NoConvergence, "superbasis residual " + format_double(sup_abs(R)) + " above tolerance");
  if (info) *info = {it, sup_abs(R), "newton"};
  return u;
}

NodalFunction bcm_gauss_seidel(const MAProblem& p, NodalFunction u, const BcmOptions& opt, int max_sweeps,
                               MASolveInfo* info) {
  const Lattice& L = *p.lattice;
  require_same_lattice(L, u.lattice());
  const std::size_t ni = L.num_interior();
  const Eigen::VectorXd f = bcm_density(p);
  BcmStencil st(p, opt.m);
  const double tol = opt.tol * (1 + sup_abs(f));
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double change = 0;
    const double scale = 1 + u.sup_norm();
    for (std::size_t z = 0; z < ni; ++z) {
      const double target = f[static_cast<Eigen::Index>(z)];
      // the operator is nonincreasing in u(z); keep the largest value that still reaches the target
      auto fits = [&](double s) {
        u[z] = s;
        return bcm_node(st, u, z).value >= target;
      };
      const double old = u[z];
      double lo = old, hi = old, step = 1e-3 * scale;
      if (fits(old)) {
        if (target == 0) {
          // every value fits; the answer is where the first difference hits zero
          hi = std::numeric_limits<double>::infinity();
          for (std::size_t b = 0; b < st.num_bases(); ++b)
            for (int i = 0; i < 3; ++i) {
              const Row& r = st.row(z, b, i);
              const double a = r.diagonal(z);  // negative
              hi = std::min(hi, -(r.eval(u) - a * old) / a);
            }
          lo = hi;
        } else {
          for (hi = old + step; fits(hi); step *= 2) lo = hi, hi += step;
        }
      } else {
        for (lo = old - step; !fits(lo); step *= 2) hi = lo, lo -= step;
      }
      for (int b = 0; b < 200 && hi - lo > 1e-15 * scale; ++b) {
        const double mid = 0.5 * (lo + hi);
        (fits(mid) ? lo : hi) = mid;
      }
      u[z] = lo;
      change = std::max(change, std::abs(lo - old));
    }
    if (change <= 1e-10) {
      const Eigen::VectorXd R = bcm_eval(p, st, f, u, nullptr);
      if (info) *info = {sweep + 1, sup_abs(R), "gauss-seidel"};
      if (sup_abs(R) <= tol || change == 0) return u;
    }
  }
  throw Error(ErrorKind::NoConvergence, "superbasis sweeps hit their cap of " + std::to_string(max_sweeps));
}

// ---------------------------------------------------------------- semi-Lagrangian scheme

Mat2 FjControl::matrix() const {
  Mat2 R;
  R << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return R * Vec2(lambda1, 1 - lambda1).asDiagonal() * R.transpose();
}

FjControlSet FjControlSet::make(int n_theta, int n_lambda) {
  require(n_theta >= 1 && n_lambda >= 1, ErrorKind::EmptyControlSet, "control grid must be nonempty");
  FjControlSet s;
  s.n_theta = n_theta;
  s.n_lambda = n_lambda;
  std::set<std::tuple<long long, long long, long long>> seen;
  auto add = [&](const FjControl& c) {
    const Mat2 B = c.matrix();
    auto key = [](double x) { return std::llround(x * 1e12); };
    if (seen.insert({key(B(0, 0)), key(B(0, 1)), key(B(1, 1))}).second) s.controls.push_back(c);
  };
  add({0.0, 0.5});
  for (int j = 0; j < n_theta; ++j)
    for (int l = 0; l <= n_lambda; ++l) add({j * M_PI / n_theta, double(l) / n_lambda});
  return s;
}

BellmanSystem fj_system(const MAProblem& p, double k, const FjControlSet& set) {
  require(!set.controls.empty(), ErrorKind::EmptyControlSet, "control set is empty");
  const Lattice& L = *p.lattice;
  require(k > 0 && k >= L.h() * (1 - 1e-12), ErrorKind::InvalidArgument, "relaxation scale must satisfy k >= h");
  const std::size_t ni = L.num_interior();

  // distinct directions modulo pi
  std::vector<double> angles;
  auto angle_index = [&](double a) {
    a = std::fmod(a, M_PI);
    if (a < 0) a += M_PI;
    for (std::size_t i = 0; i < angles.size(); ++i)
      if (std::abs(angles[i] - a) < 1e-12 || std::abs(std::abs(angles[i] - a) - M_PI) < 1e-12) return i;
    angles.push_back(a);
    return angles.size() - 1;
  };
  std::vector<std::pair<std::size_t, std::size_t>> dirs;
  for (const auto& c : set.controls) dirs.push_back({angle_index(c.theta), angle_index(c.theta + M_PI / 2)});

  std::vector<Row> rows(ni * angles.size());
  parallel_for(ni, [&](std::size_t z) {
    LinearRow r;
    for (std::size_t a = 0; a < angles.size(); ++a) {
      r.coeffs.clear();
      r.constant = 0;
      add_second_difference(L, z, Vec2(std::cos(angles[a]), std::sin(angles[a])), k, 1.0, p.boundary, true, r);
      Row out = to_row(r);
      // boundary nodes are data
      Row kept;
      kept.constant = out.constant;
      for (const auto& [i, c] : out.coeffs) {
        if (L.is_interior(i)) kept.coeffs.emplace_back(i, c);
        else kept.constant += c * p.boundary(L.point(i));
      }
      rows[z * angles.size() + a] = std::move(kept);
    }
  });

  std::vector<double> root_f(ni);
  for (std::size_t z = 0; z < ni; ++z) root_f[z] = std::sqrt(std::max(p.density_at(z), 0.0));

  std::vector<SparseRows> K;
  std::vector<Eigen::VectorXd> F;
  for (std::size_t c = 0; c < set.controls.size(); ++c) {
    const double l1 = set.controls[c].lambda1, l2 = 1 - l1;
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd fs(static_cast<Eigen::Index>(ni));
    for (std::size_t z = 0; z < ni; ++z) {
      double constant = 0;
      const std::pair<std::size_t, double> parts[2] = {{dirs[c].first, l1}, {dirs[c].second, l2}};
      for (const auto& [a, lam] : parts) {
        if (lam == 0) continue;
        const Row& r = rows[z * angles.size() + a];
        for (const auto& [i, coef] : r.coeffs) trip.emplace_back(int(z), int(i), -0.5 * lam * coef);
        constant += -0.5 * lam * r.constant;
      }
      fs[static_cast<Eigen::Index>(z)] = -constant - root_f[z] * std::sqrt(std::max(l1 * l2, 0.0));
    }
    SparseRows Kc(static_cast<Eigen::Index>(ni), static_cast<Eigen::Index>(ni));
    Kc.setFromTriplets(trip.begin(), trip.end());
    K.push_back(std::move(Kc));
    F.push_back(std::move(fs));
  }
  BellmanSystem sys(int(set.controls.size()), 1, std::move(K), std::move(F));
  sys.lattice = &L;
  sys.boundary = p.boundary;
  return sys;
}

Eigen::VectorXd fj_residual(const MAProblem& p, const NodalFunction& u, double k, const FjControlSet& set) {
  require_same_lattice(*p.lattice, u.lattice());
  const auto sys = fj_system(p, k, set);
  const Eigen::Index ni = static_cast<Eigen::Index>(p.lattice->num_interior());
  Eigen::VectorXd r(static_cast<Eigen::Index>(p.lattice->num_nodes()));
  r.head(ni) = bellman_residual(sys, u.values().head(ni));
  fill_boundary_residual(p, u, r);
  return r;
}

NodalFunction fj_solve(const MAProblem& p, double k, const FjControlSet& set, MASolveInfo* info) {
  const auto sys = fj_system(p, k, set);
  const auto res = howard_solve(sys);
  if (info) *info = {res.iterations, res.residual, "howard"};
  return p.with_boundary(res.x);
}

void write_solution_csv(const NodalFunction& u, const std::string& path) {
  const Lattice& L = u.lattice();
  CsvWriter w(path, {"node_id", "x", "y", "u"});
  for (std::size_t i = 0; i < L.num_nodes(); ++i) w.row(i, L.point(i).x(), L.point(i).y(), u[i]);
}

void write_residual_csv(const Lattice& L, const Eigen::VectorXd& r, const std::string& path) {
  CsvWriter w(path, {"node_id", "x", "y", "residual"});
  for (std::size_t i = 0; i < L.num_nodes(); ++i) w.row(i, L.point(i).x(), L.point(i).y(), r[static_cast<Eigen::Index>(i)]);
}

}  // namespace ellipsol
