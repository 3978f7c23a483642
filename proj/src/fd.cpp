#include "ellipsol/fd.hpp"

#include "ellipsol/csv.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace ellipsol {

Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, int max_iter) {
  const Eigen::Index n = A.cols();
  if (max_iter <= 0) max_iter = int(3 * n + 10);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(n, false);
  const double tol = 1e-14 * (A.norm() + 1) * (b.norm() + 1);

  for (int outer = 0; outer < max_iter; ++outer) {
    const Eigen::VectorXd w = A.transpose() * (b - A * x);
    Eigen::Index j = -1;
    double best = tol;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!passive[i] && w[i] > best) {
        best = w[i];
        j = i;
      }
    if (j < 0) break;
    passive[j] = true;

    for (int inner = 0; inner < max_iter; ++inner) {
      std::vector<Eigen::Index> idx;
      for (Eigen::Index i = 0; i < n; ++i)
        if (passive[i]) idx.push_back(i);
      Eigen::MatrixXd Ap(A.rows(), Eigen::Index(idx.size()));
      for (std::size_t k = 0; k < idx.size(); ++k) Ap.col(Eigen::Index(k)) = A.col(idx[k]);
      const Eigen::VectorXd sp = Ap.colPivHouseholderQr().solve(b);
      Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
      for (std::size_t k = 0; k < idx.size(); ++k) s[idx[k]] = sp[Eigen::Index(k)];

      bool feasible = true;
      for (auto i : idx)
        if (s[i] <= 0) feasible = false;
      if (feasible) {
        x = s;
        break;
      }
      double alpha = 1;
      for (auto i : idx)
        if (s[i] <= 0) alpha = std::min(alpha, x[i] / (x[i] - s[i]));
      x += alpha * (s - x);
      for (auto i : idx)
        if (x[i] <= 1e-15 * (1 + x.cwiseAbs().maxCoeff())) {
          x[i] = 0;
          passive[i] = false;
        }
    }
  }
  return x.cwiseMax(0.0);
}

IVec2 sign_normalize(IVec2 y) {
  if (y.x < 0 || (y.x == 0 && y.y < 0)) return -y;
  return y;
}

namespace {

IVec2 perp(const IVec2& y) { return {-y.y, y.x}; }
long dot(const IVec2& a, const IVec2& b) { return long(a.x) * b.x + long(a.y) * b.y; }

int gcd_abs(int a, int b) { return std::gcd(std::abs(a), std::abs(b)); }

// Merge directions up to sign, drop zero weights, fixed order.
SpdDecomposition finish(std::map<IVec2, double> acc, const Mat2& A, int m) {
  SpdDecomposition d;
  d.m = m;
  const double drop = 1e-15 * A.norm();
  std::vector<std::pair<IVec2, double>> items(acc.begin(), acc.end());
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.first.norm_inf() < b.first.norm_inf(); });
  std::vector<StencilTerm> terms;
  for (const auto& [y, w] : items) {
    if (w <= drop) continue;
    d.directions.push_back(y);
    d.weights.push_back(w);
    terms.push_back({y, w});
  }
  d.lambda0 = orthogonal_pair_bound(terms);
  d.residual = (reconstruct(d) - A).norm();
  return d;
}

// Splitting in an orthogonal integer frame (y1, y1-perp).
bool frame_split(const Mat2& A, const IVec2& y1, int m, std::map<IVec2, double>& out) {
  const IVec2 y2 = perp(y1);
  if ((y1 + y2).norm_inf() > m || (y1 - y2).norm_inf() > m) return false;
  const Vec2 v1 = y1.to_real();
  const Vec2 v2 = y2.to_real();
  const double n1 = v1.squaredNorm();
  const double n2 = v2.squaredNorm();
  const double a11 = v1.dot(A * v1) / (n1 * n1);
  const double a22 = v2.dot(A * v2) / (n2 * n2);
  const double a12 = v1.dot(A * v2) / (n1 * n2);
  const double w1 = a11 - std::abs(a12);
  const double w2 = a22 - std::abs(a12);
  if (w1 < 0 || w2 < 0) return false;
  out.clear();
  out[sign_normalize(y1)] += w1;
  out[sign_normalize(y2)] += w2;
  if (a12 > 0) out[sign_normalize(y1 + y2)] += a12;
  if (a12 < 0) out[sign_normalize(y1 - y2)] += -a12;
  return true;
}

std::map<IVec2, double> nnls_split(const Mat2& A, const std::vector<IVec2>& dirs) {
  Eigen::MatrixXd G(3, Eigen::Index(dirs.size()));
  const double r2 = std::sqrt(2.0);
  for (std::size_t k = 0; k < dirs.size(); ++k) {
    const double a = dirs[k].x, b = dirs[k].y;
    G.col(Eigen::Index(k)) << a * a, r2 * a * b, b * b;
  }
  Eigen::VectorXd rhs(3);
  rhs << A(0, 0), r2 * A(0, 1), A(1, 1);
  const Eigen::VectorXd w = nnls(G, rhs);
  std::map<IVec2, double> out;
  for (std::size_t k = 0; k < dirs.size(); ++k)
    if (w[Eigen::Index(k)] > 0) out[dirs[k]] += w[Eigen::Index(k)];
  return out;
}

}  // namespace

Mat2 reconstruct(const SpdDecomposition& d) {
  Mat2 S = Mat2::Zero();
  for (std::size_t k = 0; k < d.directions.size(); ++k) {
    const Vec2 y = d.directions[k].to_real();
    S += d.weights[k] * y * y.transpose();
  }
  return S;
}

SpdDecomposition decompose_spd(const Mat2& A, int m_max) {
  require(m_max >= 1, ErrorKind::InvalidArgument, "m_max must be >= 1");
  require(std::abs(A(0, 1) - A(1, 0)) <= 1e-14 * A.norm(), ErrorKind::InvalidArgument, "matrix not symmetric");
  const Mat2 S = 0.5 * (A + A.transpose());
  Eigen::SelfAdjointEigenSolver<Mat2> eig(S);
  const double lmin = eig.eigenvalues()[0];
  require(lmin > 0, ErrorKind::InvalidArgument, "matrix not positive definite");
  const double tol = 1e-10 * S.norm();
  double best_residual = std::numeric_limits<double>::infinity();
  std::map<IVec2, double> acc;

  for (int m = 1; m <= m_max; ++m) {
    // (a) canonical frame, then a frame aligned with the top eigenvector
    if (frame_split(S, {1, 0}, m, acc)) {
      auto d = finish(acc, S, m);
      if (d.lambda0 > 0 && d.residual <= tol) return d;
    }
    const Vec2 phi = eig.eigenvectors().col(1);
    const Stencil st = enumerate_stencil(m);
    IVec2 y1 = st.directions.front();
    double best_cos = -1;
    for (const auto& y : st.directions) {
      const double c = std::abs(phi.dot(y.to_real())) / y.to_real().norm();
      if (c > best_cos + 1e-15) {
        best_cos = c;
        y1 = y;
      }
    }
    if (frame_split(S, y1, m, acc)) {
      auto d = finish(acc, S, m);
      if (d.lambda0 > 0 && d.residual <= tol) return d;
    }

    // (b) nonnegative least squares over the primitive stencil directions
    std::vector<IVec2> dirs;
    for (const auto& y : st.directions)
      if (sign_normalize(y) == y && gcd_abs(y.x, y.y) == 1) dirs.push_back(y);
    auto d = finish(nnls_split(S, dirs), S, m);
    best_residual = std::min(best_residual, d.residual);
    if (d.residual <= tol && d.lambda0 > 0) return d;
    if (d.residual <= tol) {
      // no weighted orthogonal pair: reserve part of the spectrum for e1, e2
      const double shift = 0.5 * lmin;
      auto shifted = nnls_split(S - shift * Mat2::Identity(), dirs);
      shifted[{1, 0}] += shift;
      shifted[{0, 1}] += shift;
      auto ds = finish(shifted, S, m);
      best_residual = std::min(best_residual, ds.residual);
      if (ds.residual <= tol && ds.lambda0 > 0) return ds;
    }
  }
  throw Error(ErrorKind::StencilExhausted,
              "no nonnegative decomposition within m_max=" + std::to_string(m_max) +
                  ", smallest residual " + std::to_string(best_residual));
}

SpdDecomposition decompose_spd(const Mat2& A, int m_max, const Mat2& basis) {
  const Mat2 Binv = basis.inverse();
  Mat2 Ahat = Binv * A * Binv.transpose();
  Ahat(0, 1) = Ahat(1, 0) = 0.5 * (Ahat(0, 1) + Ahat(1, 0));
  return decompose_spd(Ahat, m_max);
}

double second_difference(const Domain& domain, const ScalarField& u, const Vec2& z, const Vec2& v, double k) {
  const auto [kp, km] = shortened_step(domain, z, v, k);
  const double u0 = u(z);
  return 2.0 / (kp + km) * ((u(z + kp * v) - u0) / kp + (u(z - km * v) - u0) / km);
}

double second_difference(const NodalFunction& u, std::size_t z, const IVec2& y, double k,
                         const ScalarField* boundary) {
  const Lattice& L = u.lattice();
  const auto [kp, km] = shortened_step(L, z, y, k);
  const Vec2 v = L.direction(y);
  auto value = [&](const Vec2& p) {
    if (auto i = L.locate(p)) return u[*i];
    if (boundary) return (*boundary)(p);
    throw Error(ErrorKind::RequiresInterpolant, "exit point is not a node");
  };
  const Vec2& x = L.point(z);
  const double u0 = u[z];
  return 2.0 / (kp + km) * ((value(x + kp * v) - u0) / kp + (value(x - km * v) - u0) / km);
}

void add_point_value(const Lattice& L, const Vec2& p, double coeff, const ScalarField& boundary, bool interpolate,
                     LinearRow& row) {
  if (auto i = L.locate(p)) {
    row.coeffs.emplace_back(*i, coeff);
    return;
  }
  if (std::abs(L.domain().signed_distance(p)) <= 1e-10 * L.h()) {
    row.constant += coeff * boundary(p);
    return;
  }
  if (!interpolate) throw Error(ErrorKind::RequiresInterpolant, "off-node point requested");
  const Vec2 c = L.basis().inverse() * p / L.h();
  const int i0 = int(std::floor(c.x()));
  const int j0 = int(std::floor(c.y()));
  const double tx = c.x() - i0;
  const double ty = c.y() - j0;
  const double w[4] = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
  const IVec2 corner[4] = {{i0, j0}, {i0 + 1, j0}, {i0, j0 + 1}, {i0 + 1, j0 + 1}};
  for (int q = 0; q < 4; ++q) {
    if (w[q] <= 0) continue;
    if (auto node = L.node_at(corner[q])) row.coeffs.emplace_back(*node, coeff * w[q]);
    else row.constant += coeff * w[q] * boundary(L.lattice_point(corner[q]));
  }
}

void add_second_difference(const Lattice& L, std::size_t z, const Vec2& v, double k, double weight,
                           const ScalarField& boundary, bool interpolate, LinearRow& row) {
  require(L.is_interior(z), ErrorKind::NodeNotInterior, "second difference at a boundary node");
  const Vec2& x = L.point(z);
  const auto [kp, km] = shortened_step(L.domain(), x, v, k);
  const double cp = weight * 2.0 / ((kp + km) * kp);
  const double cm = weight * 2.0 / ((kp + km) * km);
  add_point_value(L, x + kp * v, cp, boundary, interpolate, row);
  add_point_value(L, x - km * v, cm, boundary, interpolate, row);
  row.coeffs.emplace_back(z, -(cp + cm));
}

PositiveLinearOperator::PositiveLinearOperator(const Lattice& lattice, std::vector<std::vector<StencilTerm>> terms,
                                               Eigen::VectorXd f, ScalarField g)
    : lattice_(&lattice), terms_(std::move(terms)), f_(std::move(f)), g_(std::move(g)) {
  const std::size_t ni = lattice.num_interior();
  require(terms_.size() == ni && std::size_t(f_.size()) == ni, ErrorKind::LatticeMismatch,
          "operator data does not match interior node count");
  std::vector<Eigen::Triplet<double>> trip;
  offnode_ = Eigen::VectorXd::Zero(Eigen::Index(ni));
  LinearRow row;
  for (std::size_t z = 0; z < ni; ++z) {
    row.coeffs.clear();
    row.constant = 0;
    for (const auto& t : terms_[z])
      add_second_difference(lattice, z, lattice.direction(t.y), lattice.h(), t.weight, g_, false, row);
    for (const auto& [j, c] : row.coeffs) trip.emplace_back(Eigen::Index(z), Eigen::Index(j), c);
    offnode_[Eigen::Index(z)] = row.constant;
  }
  full_.resize(Eigen::Index(ni), Eigen::Index(lattice.num_nodes()));
  full_.setFromTriplets(trip.begin(), trip.end());
}

Eigen::VectorXd PositiveLinearOperator::boundary_values() const {
  const Lattice& L = *lattice_;
  Eigen::VectorXd gb(static_cast<Eigen::Index>(L.num_boundary()));
  for (std::size_t b = 0; b < L.num_boundary(); ++b) gb[Eigen::Index(b)] = g_(L.point(L.num_interior() + b));
  return gb;
}

Eigen::SparseMatrix<double, Eigen::RowMajor> PositiveLinearOperator::interior_matrix() const {
  return full_.leftCols(Eigen::Index(lattice_->num_interior()));
}

Eigen::VectorXd PositiveLinearOperator::boundary_constant() const {
  const Eigen::Index nb = Eigen::Index(lattice_->num_boundary());
  return full_.rightCols(nb) * boundary_values() + offnode_;
}

PositiveLinearOperator assemble_linear(const Lattice& lattice, const MatrixField& A, const ScalarField& f,
                                       const ScalarField& g, int m_max) {
  const std::size_t ni = lattice.num_interior();
  std::vector<std::vector<StencilTerm>> terms(ni);
  Eigen::VectorXd fv(static_cast<Eigen::Index>(ni));
  Mat2 last = Mat2::Constant(std::numeric_limits<double>::quiet_NaN());
  std::vector<StencilTerm> cached;
  for (std::size_t z = 0; z < ni; ++z) {
    const Mat2 Az = A(lattice.point(z));
    if (Az != last) {
      SpdDecomposition d;
      try {
        d = decompose_spd(Az, m_max, lattice.basis());
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::StencilExhausted) throw;
        throw Error(ErrorKind::StencilExhausted, std::string(e.what()) + " at node " + std::to_string(z));
      }
      cached.clear();
      for (std::size_t k = 0; k < d.directions.size(); ++k) cached.push_back({d.directions[k], d.weights[k]});
      last = Az;
    }
    terms[z] = cached;
    fv[Eigen::Index(z)] = f(lattice.point(z));
  }
  return PositiveLinearOperator(lattice, std::move(terms), std::move(fv), g);
}

NodalFunction apply(const PositiveLinearOperator& op, const NodalFunction& u) {
  const Lattice& L = op.lattice();
  require_same_lattice(L, u.lattice());
  NodalFunction r(L);
  const Eigen::Index ni = Eigen::Index(L.num_interior());
  r.values().head(ni) = op.matrix() * u.values() + op.offnode_constant() - op.source();
  for (std::size_t i = L.num_interior(); i < L.num_nodes(); ++i) r[i] = u[i] - op.boundary()(L.point(i));
  return r;
}

NodalFunction solve_monotone_linear(const PositiveLinearOperator& op) {
  const Lattice& L = op.lattice();
  const Eigen::Index ni = Eigen::Index(L.num_interior());
  Eigen::SparseMatrix<double> K = op.interior_matrix();
  K.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(K);
  require(lu.info() == Eigen::Success, ErrorKind::SingularSystem, "factorization failed");
  const Eigen::VectorXd rhs = op.source() - op.boundary_constant();
  Eigen::VectorXd x = lu.solve(rhs);
  require(lu.info() == Eigen::Success && x.allFinite(), ErrorKind::SingularSystem, "solve failed");
  NodalFunction u(L);
  u.values().head(ni) = x;
  u.values().tail(Eigen::Index(L.num_boundary())) = op.boundary_values();
  return u;
}

double orthogonal_pair_bound(const std::vector<StencilTerm>& terms) {
  std::map<IVec2, double> acc;
  for (const auto& t : terms) acc[sign_normalize(t.y)] += t.weight;
  double best = 0;
  for (const auto& [a, wa] : acc)
    for (const auto& [b, wb] : acc)
      if (a < b && dot(a, b) == 0) best = std::max(best, std::min(wa, wb));
  return best;
}

PositivityReport check_positive_type(const PositiveLinearOperator& op) {
  PositivityReport rep;
  rep.min_lambda0 = std::numeric_limits<double>::infinity();
  rep.worst_weight = std::numeric_limits<double>::infinity();
  for (std::size_t z = 0; z < op.lattice().num_interior(); ++z) {
    for (const auto& t : op.terms(z))
      if (t.weight < rep.worst_weight) {
        rep.worst_weight = t.weight;
        rep.worst_weight_node = z;
      }
    const double l0 = orthogonal_pair_bound(op.terms(z));
    if (l0 < rep.min_lambda0) {
      rep.min_lambda0 = l0;
      rep.min_lambda0_node = z;
    }
  }
  rep.ok = rep.worst_weight >= 0 && rep.min_lambda0 > 0;
  return rep;
}

void write_operator_csv(const PositiveLinearOperator& op, const std::string& path) {
  CsvWriter w(path, {"node_id", "y1", "y2", "weight"});
  for (std::size_t z = 0; z < op.lattice().num_interior(); ++z)
    for (const auto& t : op.terms(z)) w.row(z, t.y.x, t.y.y, t.weight);
}

}  // namespace ellipsol
