#include "ellipsol/harness.hpp"

#include "ellipsol/csv.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace ellipsol {

std::string_view to_string(Regularity r) {
  switch (r) {
    case Regularity::Smooth: return "smooth";
    case Regularity::C11: return "C11";
    case Regularity::Alexandrov: return "alexandrov";
    case Regularity::HjbSmooth: return "hjb-smooth";
  }
  return "?";
}

namespace {
constexpr std::pair<Scheme, std::string_view> kSchemeNames[] = {
    {Scheme::Op, "op"},
    {Scheme::Bcm, "bcm"},
    {Scheme::Fj, "fj"},
    {Scheme::HjbHoward, "hjb-howard"},
    {Scheme::Isaacs2lh, "isaacs-2lh"},
    {Scheme::Richardson, "richardson"},
    {Scheme::Linear, "linear"},
};
}  // namespace

std::string_view to_string(Scheme s) {
  for (const auto& [k, n] : kSchemeNames)
    if (k == s) return n;
  return "?";
}

std::optional<Scheme> parse_scheme(std::string_view name) {
  for (const auto& [k, n] : kSchemeNames)
    if (n == name) return k;
  return std::nullopt;
}

bool ManufacturedCase::supports(Scheme s) const {
  switch (s) {
    case Scheme::Op:
    case Scheme::Bcm:
    case Scheme::Fj: return is_monge_ampere();
    case Scheme::HjbHoward:
    case Scheme::Isaacs2lh:
    case Scheme::Richardson: return !controls.empty();
    case Scheme::Linear: return controls.size() == 1;
  }
  return false;
}

std::vector<std::string> case_names() { return {"smooth-ma", "c11-ma", "point-mass", "hjb-smooth", "poisson"}; }

ManufacturedCase builtin_case(std::string_view name) {
  ManufacturedCase c;
  c.name = std::string(name);
  if (name == "smooth-ma") {
    c.exact = [](const Vec2& x) { return std::exp(0.5 * x.squaredNorm()); };
    c.density = [](const Vec2& x) {
      const double r2 = x.squaredNorm();
      return (1 + r2) * std::exp(r2);
    };
    c.rate_lo = 0.7;
    c.rate_hi = 1.3;
  } else if (name == "c11-ma") {
    c.regularity = Regularity::C11;
    c.lo = {-2, -2};
    c.hi = {2, 2};
    c.exact = [](const Vec2& x) {
      const double s = std::max(x.norm() - 1, 0.0);
      return 0.5 * s * s;
    };
    c.density = [](const Vec2& x) {
      const double r = x.norm();
      return r > 1 ? 1 - 1 / r : 0.0;
    };
    c.rate_lo = 0.4;
    c.rate_hi = 1.1;
  } else if (name == "point-mass") {
    // the cone |x| - 1 carries its whole measure, pi, at the apex
    c.regularity = Regularity::Alexandrov;
    c.exact = [](const Vec2& x) { return x.norm() - 1; };
    c.point_masses = {{Vec2(0, 0), std::numbers::pi}};
    c.rate_lo = 0.5;
    c.rate_hi = 2.5;
    c.op_window = 0;
  } else if (name == "hjb-smooth") {
    // controls I and diag(2,1); each one is slack by a ramp on the half where the other is active
    c.regularity = Regularity::HjbSmooth;
    c.lo = {0, 0};
    c.exact = [](const Vec2& x) { return std::sin(std::numbers::pi * x.x()) * std::sin(std::numbers::pi * x.y()); };
    c.controls = {Mat2::Identity(), Vec2(2, 1).asDiagonal()};
    c.control_source = [](int a, const Vec2& x) {
      const double pi2 = std::numbers::pi * std::numbers::pi;
      const double s = std::sin(std::numbers::pi * x.x()) * std::sin(std::numbers::pi * x.y());
      const double trace = a == 0 ? -2 * pi2 * s : -3 * pi2 * s;
      const double gap = a == 0 ? std::max(x.x() - 0.5, 0.0) : std::max(0.5 - x.x(), 0.0);
      return trace - gap;
    };
    c.rate_lo = 0.9;
    c.rate_hi = 2.3;
  } else if (name == "poisson") {
    c.exact = [](const Vec2& x) { return std::exp(x.x()) * std::cos(x.y()) + x.squaredNorm(); };
    c.controls = {Mat2::Identity()};
    c.control_source = [](int, const Vec2&) { return 4.0; };
    c.rate_lo = 1.5;
    c.rate_hi = 2.5;
  } else {
    throw Error(ErrorKind::InvalidArgument, "unknown case '" + std::string(name) + "'");
  }
  c.boundary = c.exact;
  return c;
}

namespace {

MAProblem ma_problem(const ManufacturedCase& c, const Lattice& L, const StudyOptions& opt) {
  if (c.density) return MAProblem::with_density(L, c.density, c.boundary, opt.quadrature);
  std::vector<std::pair<std::size_t, double>> masses;
  for (const auto& [x, m] : c.point_masses) {
    std::size_t best = 0;
    double dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < L.num_interior(); ++i)
      if (double d = (L.point(i) - x).norm(); d < dist) {
        dist = d;
        best = i;
      }
    require(dist < std::numeric_limits<double>::infinity(), ErrorKind::NoInteriorNodes, "no node for point mass");
    masses.emplace_back(best, m);
  }
  return MAProblem::with_point_masses(L, masses, c.boundary);
}

BellmanSystem control_system(const ManufacturedCase& c, const Lattice& L) {
  ControlProblem prob;
  prob.lattice = &L;
  prob.num_alpha = int(c.controls.size());
  prob.coefficient = [&c](int a, int, const Vec2&) { return c.controls[std::size_t(a)]; };
  prob.source = [&c](int a, int, const Vec2& x) { return c.control_source(a, x); };
  prob.boundary = c.boundary;
  return assemble_bellman(prob);
}

}  // namespace

CaseSolution solve_case(const ManufacturedCase& c, Scheme scheme, double h, const StudyOptions& opt) {
  require(c.supports(scheme), ErrorKind::InvalidArgument,
          "case '" + c.name + "' cannot be solved with scheme " + std::string(to_string(scheme)));
  CaseSolution out;
  out.lattice = std::make_unique<Lattice>(Lattice::build(c.domain(), h));
  const Lattice& L = *out.lattice;
  const auto n = static_cast<Eigen::Index>(L.num_nodes());

  if (c.is_monge_ampere()) {
    const MAProblem p = ma_problem(c, L, opt);
    MASolveInfo info;
    if (scheme == Scheme::Op) {
      OpOptions o;
      o.window = c.op_window;
      if (opt.tol > 0) o.rtol = opt.tol;
      out.u = op_solve(p, o, &info);
      out.residual = op_residual(p, out.u, c.op_window);
    } else if (scheme == Scheme::Bcm) {
      BcmOptions o;
      o.m = opt.bcm_m;
      if (opt.tol > 0) o.tol = opt.tol;
      out.u = bcm_solve(p, o, &info);
      out.residual = bcm_residual(p, out.u, o.m);
    } else {
      const auto set = FjControlSet::make(opt.fj_n_theta, opt.fj_n_lambda);
      const double k = std::sqrt(h);
      out.u = fj_solve(p, k, set, &info);
      out.residual = fj_residual(p, out.u, k, set);
    }
    out.iterations = info.iterations;
    out.method = info.method;
  } else if (scheme == Scheme::Linear) {
    const Mat2 A = c.controls.front();
    auto op = assemble_linear(
        L, [A](const Vec2&) { return A; }, [&c](const Vec2& x) { return c.control_source(0, x); }, c.boundary, 2);
    out.u = solve_monotone_linear(op);
    out.residual = apply(op, out.u).values();
    out.iterations = 1;
    out.method = "sparse-lu";
  } else {
    const BellmanSystem sys = control_system(c, L);
    SolverOptions so;
    if (opt.tol > 0) so.tol = opt.tol;
    SolveResult r;
    if (scheme == Scheme::HjbHoward) {
      r = howard_solve(sys, std::nullopt, so);
      out.method = "howard";
    } else if (scheme == Scheme::Isaacs2lh) {
      r = two_level_howard(sys, std::nullopt, so);
      out.method = "two-level-howard";
    } else {
      SolverOptions ro{1e-8, 1000000};
      if (opt.tol > 0) ro.tol = opt.tol;
      r = richardson_solve(sys, std::nullopt, 0, ro);
      out.method = "richardson";
    }
    out.u = to_nodal(L, r.x, c.boundary);
    out.residual = Eigen::VectorXd::Zero(n);
    out.residual.head(r.x.size()) = bellman_residual(sys, r.x);
    out.trace = std::move(r.trace);
    out.iterations = r.iterations;
  }
  out.residual_norm = out.residual.size() ? out.residual.cwiseAbs().maxCoeff() : 0.0;
  return out;
}

double fit_rate(const std::vector<double>& h, const std::vector<double>& e) {
  const std::size_t n = std::min(h.size(), e.size());
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(e[i] > 0) || !(h[i] > 0)) return std::numeric_limits<double>::quiet_NaN();
    const double x = std::log(h[i]), y = std::log(e[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double den = double(n) * sxx - sx * sx;
  if (den <= 0) return std::numeric_limits<double>::quiet_NaN();
  return (double(n) * sxy - sx * sy) / den;
}

ConvergenceReport run_convergence(const ManufacturedCase& c, Scheme scheme, const std::vector<double>& h_list,
                                  const StudyOptions& opt) {
  require(h_list.size() >= 2, ErrorKind::InvalidArgument, "a convergence study needs at least two levels");
  for (std::size_t i = 0; i < h_list.size(); ++i) {
    require(h_list[i] > 0, ErrorKind::InvalidArgument, "mesh sizes must be positive");
    if (i)
      require(std::abs(h_list[i] - 0.5 * h_list[i - 1]) <= 1e-12 * h_list[i - 1], ErrorKind::InvalidArgument,
              "mesh sizes must halve from one level to the next");
  }
  require(c.supports(scheme), ErrorKind::InvalidArgument,
          "case '" + c.name + "' cannot be solved with scheme " + std::string(to_string(scheme)));

  ConvergenceReport rep;
  rep.case_name = c.name;
  rep.scheme = scheme;
  rep.rate_lo = c.rate_lo;
  rep.rate_hi = c.rate_hi;
  for (double h : h_list) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const CaseSolution s = solve_case(c, scheme, h, opt);
      double err = 0;
      for (std::size_t i = 0; i < s.lattice->num_interior(); ++i)
        err = std::max(err, std::abs(s.u[i] - c.exact(s.lattice->point(i))));
      rep.h.push_back(h);
      rep.errors.push_back(err);
      rep.iterations.push_back(s.iterations);
      rep.seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    } catch (const Error& e) {
      rep.failure = e.what();
      rep.failure_kind = e.kind();
      break;
    }
  }
  rep.rate = fit_rate(rep.h, rep.errors);
  const std::size_t n = rep.h.size();
  rep.rate_last_two = n >= 2 ? fit_rate({rep.h[n - 2], rep.h[n - 1]}, {rep.errors[n - 2], rep.errors[n - 1]})
                             : std::numeric_limits<double>::quiet_NaN();
  return rep;
}

void write_report_csv(const std::vector<ConvergenceReport>& reports, const std::string& path) {
  CsvWriter w(path, {"case", "scheme", "h", "sup_error", "rate_cum", "seconds"});
  for (const auto& r : reports)
    for (std::size_t i = 0; i < r.h.size(); ++i) {
      const std::vector<double> h(r.h.begin(), r.h.begin() + long(i) + 1);
      const std::vector<double> e(r.errors.begin(), r.errors.begin() + long(i) + 1);
      w.row(r.case_name, std::string(to_string(r.scheme)), r.h[i], r.errors[i], fit_rate(h, e), r.seconds[i]);
    }
}

NodalFunction generate_convex_nodal(std::uint64_t seed, const Lattice& lattice) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0, 1);
  const double th = std::numbers::pi * unit(rng);
  const Mat2 R = Eigen::Rotation2Dd(th).toRotationMatrix();
  const Mat2 M = R * Vec2(0.2 + 1.8 * unit(rng), 0.2 + 1.8 * unit(rng)).asDiagonal() * R.transpose();
  const Vec2 b(unit(rng) - 0.5, unit(rng) - 0.5);

  const auto& verts = lattice.domain().vertices();
  Vec2 lo = verts.front(), hi = verts.front();
  for (const auto& v : verts) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  struct Cone {
    Vec2 apex;
    double weight;
  };
  std::vector<Cone> cones(std::size_t(rng() % 4));
  for (auto& cone : cones) {
    cone.apex = lo + (hi - lo).cwiseProduct(Vec2(unit(rng), unit(rng)));
    cone.weight = unit(rng);
  }
  return NodalFunction::interpolate(lattice, [&](const Vec2& x) {
    double v = 0.5 * x.dot(M * x) + b.dot(x);
    for (const auto& cone : cones) v += cone.weight * (x - cone.apex).norm();
    return v;
  });
}

}  // namespace ellipsol
