#include "ellipsol/bellman.hpp"

#include "ellipsol/csv.hpp"
#include "ellipsol/log.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>

namespace ellipsol {

BellmanSystem::BellmanSystem(int num_alpha, int num_beta, std::vector<SparseRows> K, std::vector<Eigen::VectorXd> f)
    : num_alpha_(num_alpha), num_beta_(num_beta), K_(std::move(K)), f_(std::move(f)) {
  require(num_alpha >= 1 && num_beta >= 1, ErrorKind::EmptyControlSet, "control sets must be nonempty");
  require(K_.size() == std::size_t(num_alpha * num_beta) && f_.size() == K_.size(), ErrorKind::InvalidArgument,
          "expected one matrix and one vector per control pair");
  const Eigen::Index n = K_.front().rows();
  for (std::size_t c = 0; c < K_.size(); ++c) {
    require(K_[c].rows() == n && K_[c].cols() == n && f_[c].size() == n, ErrorKind::InvalidArgument,
            "control systems differ in size");
    K_[c].makeCompressed();
  }
}

double BellmanSystem::max_diagonal() const {
  double d = 0;
  for (const auto& K : K_)
    for (Eigen::Index i = 0; i < K.rows(); ++i) d = std::max(d, std::abs(K.coeff(i, i)));
  return d;
}

double BellmanSystem::scale() const {
  double s = 0;
  for (const auto& f : f_)
    if (f.size()) s = std::max(s, f.cwiseAbs().maxCoeff());
  return 1.0 + s;
}

BellmanSystem assemble_bellman(const ControlProblem& p) {
  require(p.lattice != nullptr, ErrorKind::InvalidArgument, "control problem has no lattice");
  require(p.num_alpha >= 1 && p.num_beta >= 1, ErrorKind::EmptyControlSet, "control sets must be nonempty");
  std::vector<SparseRows> K;
  std::vector<Eigen::VectorXd> f;
  for (int b = 0; b < p.num_beta; ++b)
    for (int a = 0; a < p.num_alpha; ++a) {
      auto op = assemble_linear(
          *p.lattice, [&](const Vec2& x) { return p.coefficient(a, b, x); },
          [&](const Vec2& x) { return p.source(a, b, x); }, p.boundary, p.m_max);
      K.push_back(-op.interior_matrix());
      f.push_back(op.boundary_constant() - op.source());
    }
  BellmanSystem sys(p.num_alpha, p.num_beta, std::move(K), std::move(f));
  sys.lattice = p.lattice;
  sys.boundary = p.boundary;
  return sys;
}

namespace {

double row_value(const SparseRows& K, const Eigen::VectorXd& f, const Eigen::VectorXd& x, Eigen::Index i) {
  double s = 0;
  for (SparseRows::InnerIterator it(K, i); it; ++it) s += it.value() * x[it.col()];
  return s - f[i];
}

double sup_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

TraceRow make_row(int iter, double residual, int changes, const Eigen::VectorXd& x) {
  return {iter, residual, changes, x.size() ? x.minCoeff() : 0.0, x.size() ? x.maxCoeff() : 0.0};
}

int default_cap(int controls, Eigen::Index n) {
  return std::max(20, int(std::ceil(10.0 * controls * std::sqrt(double(n)))));
}

}  // namespace

Eigen::VectorXd bellman_residual(const BellmanSystem& sys, const Eigen::VectorXd& x, Policy* policy,
                                 const std::vector<int>* fixed_beta) {
  const Eigen::Index n = sys.size();
  require(x.size() == n, ErrorKind::InvalidArgument, "iterate has the wrong size");
  Eigen::VectorXd F(n);
  if (policy) {
    policy->alpha.assign(std::size_t(n), 0);
    policy->beta.assign(std::size_t(n), 0);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_a = 0, best_b = 0;
    const int b_lo = fixed_beta ? (*fixed_beta)[std::size_t(i)] : 0;
    const int b_hi = fixed_beta ? b_lo + 1 : sys.num_beta();
    for (int b = b_lo; b < b_hi; ++b) {
      double inner = -std::numeric_limits<double>::infinity();
      int arg = 0;
      for (int a = 0; a < sys.num_alpha(); ++a) {
        const double v = row_value(sys.K(a, b), sys.f(a, b), x, i);
        if (v > inner) inner = v, arg = a;
      }
      if (inner < best) best = inner, best_a = arg, best_b = b;
    }
    F[i] = best;
    if (policy) {
      policy->alpha[std::size_t(i)] = best_a;
      policy->beta[std::size_t(i)] = best_b;
    }
  }
  return F;
}

Policy select_policy(const BellmanSystem& sys, const Eigen::VectorXd& x) {
  Policy p;
  bellman_residual(sys, x, &p);
  return p;
}

Eigen::VectorXd solve_policy(const BellmanSystem& sys, const Policy& policy) {
  const Eigen::Index n = sys.size();
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int a = policy.alpha[std::size_t(i)], b = policy.beta[std::size_t(i)];
    const auto& K = sys.K(a, b);
    for (SparseRows::InnerIterator it(K, i); it; ++it) trip.emplace_back(int(i), int(it.col()), it.value());
    rhs[i] = sys.f(a, b)[i];
  }
  Eigen::SparseMatrix<double> M(n, n);
  M.setFromTriplets(trip.begin(), trip.end());
  M.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(M);
  require(lu.info() == Eigen::Success, ErrorKind::SingularSystem, "policy matrix is singular");
  Eigen::VectorXd x = lu.solve(rhs);
  require(lu.info() == Eigen::Success && x.allFinite(), ErrorKind::SingularSystem, "policy solve failed");
  return x;
}

SolveResult howard_solve(const BellmanSystem& sys, std::optional<Eigen::VectorXd> x_init, const SolverOptions& opt,
                         const std::vector<int>* fixed_beta) {
  const Eigen::Index n = sys.size();
  const double tol = opt.tol * sys.scale();
  const int cap = opt.max_iter > 0 ? opt.max_iter : default_cap(sys.num_alpha(), n);
  Eigen::VectorXd x;
  if (x_init) {
    x = std::move(*x_init);
  } else {
    Policy first{std::vector<int>(std::size_t(n), 0),
                 fixed_beta ? *fixed_beta : std::vector<int>(std::size_t(n), 0)};
    x = solve_policy(sys, first);
  }

  SolveResult res;
  Policy prev;
  bool have_prev = false;
  for (int k = 0; k < cap; ++k) {
    Policy pol;
    const Eigen::VectorXd F = bellman_residual(sys, x, &pol, fixed_beta);
    int changes = 0;
    if (have_prev)
      for (std::size_t i = 0; i < pol.alpha.size(); ++i) changes += pol.alpha[i] != prev.alpha[i];
    else
      changes = int(n);
    if (have_prev && (changes == 0 || sup_norm(F) <= tol)) {
      res.x = x;
      res.policy = prev;
      res.iterations = k;
      res.residual = sup_norm(F);
      return res;
    }
    Eigen::VectorXd next = solve_policy(sys, pol);
    if (have_prev) res.monotonicity_violation = std::max(res.monotonicity_violation, (next - x).maxCoeff());
    x = std::move(next);
    const Eigen::VectorXd Fn = bellman_residual(sys, x, nullptr, fixed_beta);
    res.trace.push_back(make_row(k, sup_norm(Fn), changes, x));
    log_debug("howard step " + std::to_string(k) + " changes " + std::to_string(changes) + " residual " +
              format_double(sup_norm(Fn)));
    prev = std::move(pol);
    have_prev = true;
  }
  throw ConvergenceFailure(ErrorKind::NoConvergence,
                           "policy iteration did not settle in " + std::to_string(cap) + " steps", res.trace);
}

SolveResult two_level_howard(const BellmanSystem& sys, std::optional<Eigen::VectorXd> x_init,
                             const SolverOptions& opt) {
  const Eigen::Index n = sys.size();
  const double tol = opt.tol * sys.scale();
  const int cap = opt.max_iter > 0 ? opt.max_iter : default_cap(sys.num_beta(), n);
  Eigen::VectorXd x = x_init ? std::move(*x_init)
                             : solve_policy(sys, Policy{std::vector<int>(std::size_t(n), 0),
                                                        std::vector<int>(std::size_t(n), 0)});
  SolveResult res;
  std::vector<int> prev_beta;
  for (int k = 0; k < cap; ++k) {
    Policy pol;
    bellman_residual(sys, x, &pol);
    if (!prev_beta.empty() && pol.beta == prev_beta) break;
    int changes = 0;
    if (prev_beta.empty())
      changes = int(n);
    else
      for (std::size_t i = 0; i < pol.beta.size(); ++i) changes += pol.beta[i] != prev_beta[i];

    SolveResult inner = howard_solve(sys, x, opt, &pol.beta);
    if (!prev_beta.empty())
      res.outer_monotonicity_violation = std::max(res.outer_monotonicity_violation, (x - inner.x).maxCoeff());
    res.monotonicity_violation = std::max(res.monotonicity_violation, inner.monotonicity_violation);
    res.trace.insert(res.trace.end(), inner.trace.begin(), inner.trace.end());
    x = std::move(inner.x);
    prev_beta = pol.beta;
    const Eigen::VectorXd F = bellman_residual(sys, x);
    res.outer_trace.push_back(make_row(k, sup_norm(F), changes, x));
    res.iterations = k + 1;
    if (sup_norm(F) <= tol) break;
    if (k + 1 == cap)
      throw ConvergenceFailure(ErrorKind::NoConvergence,
                               "outer policy iteration did not settle in " + std::to_string(cap) + " steps",
                               res.outer_trace);
  }
  res.residual = sup_norm(bellman_residual(sys, x, &res.policy));
  res.x = std::move(x);
  return res;
}

SolveResult richardson_solve(const BellmanSystem& sys, std::optional<Eigen::VectorXd> x_init, double Lambda_N,
                             const SolverOptions& opt) {
  const Eigen::Index n = sys.size();
  const double Lambda = Lambda_N > 0 ? Lambda_N : 1.01 * sys.max_diagonal();
  require(Lambda > 0, ErrorKind::InvalidArgument, "Richardson step needs a positive Lambda_N");
  const double tol = opt.tol * sys.scale();
  const int cap = opt.max_iter > 0 ? opt.max_iter : 1000000;
  Eigen::VectorXd x = x_init ? std::move(*x_init) : Eigen::VectorXd::Zero(n);

  SolveResult res;
  Eigen::VectorXd F = bellman_residual(sys, x);
  const double r0 = std::max(sup_norm(F), std::numeric_limits<double>::min());
  double r = sup_norm(F);
  int k = 0;
  for (; k < cap && r > tol; ++k) {
    x -= F / Lambda;
    F = bellman_residual(sys, x);
    r = sup_norm(F);
    if (k < 100 || k % 1000 == 0) res.trace.push_back(make_row(k, r, 0, x));
    if (!std::isfinite(r) || r > 10.0 * r0)
      throw ConvergenceFailure(ErrorKind::Diverging, "Richardson residual grew past ten times its start",
                               res.trace);
  }
  if (res.trace.empty() || res.trace.back().iter != k - 1) res.trace.push_back(make_row(std::max(k - 1, 0), r, 0, x));
  res.contraction = k > 0 ? std::pow(std::max(r, std::numeric_limits<double>::min()) / r0, 1.0 / k) : 0.0;
  if (r > tol)
    throw ConvergenceFailure(ErrorKind::NoConvergence,
                             "Richardson iteration hit its cap of " + std::to_string(cap), res.trace);
  res.iterations = k;
  res.residual = r;
  res.policy = select_policy(sys, x);
  res.x = std::move(x);
  return res;
}

NodalFunction to_nodal(const Lattice& lattice, const Eigen::VectorXd& x, const ScalarField& g) {
  const Eigen::Index ni = Eigen::Index(lattice.num_interior());
  require(x.size() == ni, ErrorKind::LatticeMismatch, "unknowns do not match interior node count");
  NodalFunction u(lattice);
  u.values().head(ni) = x;
  for (std::size_t i = lattice.num_interior(); i < lattice.num_nodes(); ++i) u[i] = g ? g(lattice.point(i)) : 0.0;
  return u;
}

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path) {
  CsvWriter w(path, {"iter", "residual", "policy_changes", "x_min", "x_max"});
  for (const auto& t : trace) w.row(t.iter, t.residual, t.policy_changes, t.x_min, t.x_max);
}

}  // namespace ellipsol
