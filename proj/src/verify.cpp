#include "ellipsol/verify.hpp"

#include "ellipsol/harness.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace ellipsol {

namespace {

class Timer {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

// Accumulates per-trial discrepancies against a tolerance.
struct Tally {
  OracleResult r;
  Timer timer;

  Tally(std::string name, double tol) {
    r.name = std::move(name);
    r.tol = tol;
  }
  void add(double discrepancy) {
    ++r.trials;
    if (!(discrepancy <= r.tol)) ++r.violations;
    if (std::isnan(discrepancy) || discrepancy > r.worst) r.worst = discrepancy;
  }
  OracleResult done() {
    r.seconds = timer.seconds();
    return r;
  }
};

std::uint64_t stream_seed(const VerifyOptions& opt, std::uint64_t salt) {
  std::seed_seq seq{opt.seed, salt};
  std::uint64_t s[2];
  seq.generate(reinterpret_cast<std::uint32_t*>(s), reinterpret_cast<std::uint32_t*>(s) + 4);
  return s[0] ^ s[1];
}

Mat2 random_spd(std::mt19937_64& rng, double max_cond) {
  std::uniform_real_distribution<double> U(0, 1);
  const double l1 = 0.5 + U(rng);
  const double l2 = l1 * (1 + (max_cond - 1) * U(rng));
  const Mat2 R = Eigen::Rotation2Dd(std::numbers::pi * U(rng)).toRotationMatrix();
  Mat2 A = R * Vec2(l1, l2).asDiagonal() * R.transpose();
  A(1, 0) = A(0, 1);
  return A;
}

// Smooth random scalar field with moderate derivatives.
ScalarField random_field(std::mt19937_64& rng, double amplitude) {
  std::uniform_real_distribution<double> U(-1, 1);
  const double a = U(rng), b = U(rng), c = U(rng), d = 2 * U(rng), e = 2 * U(rng);
  return [=](const Vec2& x) { return amplitude * (a * std::sin(d * x.x() + e * x.y()) + b * x.x() + c * x.y() * x.x()); };
}

ControlProblem random_control_problem(std::mt19937_64& rng, const Lattice& L, int na, int nb,
                                      std::vector<Mat2>& A, std::vector<ScalarField>& f) {
  A.clear();
  f.clear();
  for (int c = 0; c < na * nb; ++c) {
    A.push_back(random_spd(rng, 3));
    f.push_back(random_field(rng, 2));
  }
  ControlProblem p;
  p.lattice = &L;
  p.num_alpha = na;
  p.num_beta = nb;
  p.coefficient = [&A, na](int a, int b, const Vec2& x) {
    return A[std::size_t(a + na * b)] * (1 + 0.25 * x.squaredNorm());
  };
  p.source = [&f, na](int a, int b, const Vec2& x) { return f[std::size_t(a + na * b)](x); };
  p.boundary = random_field(rng, 1);
  p.m_max = 2;
  return p;
}

double rel_residual(const BellmanSystem& sys, const Eigen::VectorXd& x) {
  return bellman_residual(sys, x).cwiseAbs().maxCoeff() / sys.scale();
}

Domain box(double r) { return Domain::box(Vec2(-r, -r), Vec2(r, r)); }

}  // namespace

OracleResult verify_quadratic_exactness(const VerifyOptions& opt, int trials) {
  Tally t("quadratic-exactness", 1e-10);
  std::mt19937_64 rng(stream_seed(opt, 1));
  std::uniform_int_distribution<int> Di(1, 6), Do(-5, 5);
  std::uniform_real_distribution<double> U(-1, 1);
  int far_nodes = 0;
  while (t.r.trials < trials) {
    Mat2 M;
    const int b = Do(rng);
    M << Di(rng), b, b, Di(rng);
    Eigen::SelfAdjointEigenSolver<Mat2> es(M);
    if (es.eigenvalues()[0] <= 0 || es.eigenvalues()[1] / es.eigenvalues()[0] > 10) continue;
    LatticeOptions lo;
    lo.lambda = es.eigenvalues()[0];
    lo.Lambda = es.eigenvalues()[1];
    const double h = std::array<double, 3>{1.0, 0.5, 0.25}[std::size_t(t.r.trials % 3)];
    const double Rb = 8 * lo.Lambda / lo.lambda;
    const double half = (Rb + 1.5) * h;
    auto L = Lattice::build(box(half), h, Mat2::Identity(), lo);
    const Vec2 q(U(rng), U(rng));
    auto v = NodalFunction::interpolate(L, [&](const Vec2& x) { return 0.5 * x.dot(M * x) + q.dot(x); });
    double worst = 0;
    for (std::size_t z = 0; z < L.num_interior(); ++z) {
      if (L.distance_to_boundary(z) < L.r_bar() * h) continue;
      ++far_nodes;
      const double expect = M.determinant() * L.cell_measure(z);
      worst = std::max(worst, std::abs(subdifferential(v, z).area - expect) / expect);
    }
    t.add(worst);
  }
  t.r.detail = std::to_string(far_nodes) + " far nodes";
  return t.done();
}

OracleResult verify_fd_consistency(const VerifyOptions& opt, int trials) {
  Tally t("fd-consistency", 1e-10);
  std::mt19937_64 rng(stream_seed(opt, 2));
  std::uniform_real_distribution<double> U(-1, 1);
  auto L = Lattice::build(box(1), 0.125);
  double worst_decomp = 0;
  for (int k = 0; k < trials; ++k) {
    const Mat2 A = random_spd(rng, 10);
    const Mat2 P = random_spd(rng, 5) * U(rng);
    const Vec2 q(U(rng), U(rng));
    auto p = [&](const Vec2& x) { return 0.5 * x.dot(P * x) + q.dot(x); };
    const double target = A.cwiseProduct(P).sum();
    const auto d = decompose_spd(A, 3);
    const double dres = (reconstruct(d) - A).norm() / A.norm();
    worst_decomp = std::max(worst_decomp, dres);
    auto op = assemble_linear(
        L, [&](const Vec2&) { return A; }, [](const Vec2&) { return 0.0; }, p, 3);
    const auto r = apply(op, NodalFunction::interpolate(L, p));
    double worst = dres;
    for (std::size_t z = 0; z < L.num_interior(); ++z)
      worst = std::max(worst, std::abs(r[z] - target) / (1 + std::abs(target)));
    t.add(worst);
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "decomposition %.1e", worst_decomp);
  t.r.detail = buf;
  return t.done();
}

OracleResult verify_howard(const VerifyOptions& opt, int trials) {
  Tally t("howard", 1);
  std::mt19937_64 rng(stream_seed(opt, 3));
  std::uniform_int_distribution<int> NA(1, 5), NH(4, 20);
  int max_iter = 0;
  std::size_t max_n = 0;
  for (int k = 0; k < trials; ++k) {
    auto L = Lattice::build(box(1), 2.0 / NH(rng));
    std::vector<Mat2> A;
    std::vector<ScalarField> f;
    const auto prob = random_control_problem(rng, L, NA(rng), 1, A, f);
    const auto sys = assemble_bellman(prob);
    const auto r = howard_solve(sys);
    max_iter = std::max(max_iter, r.iterations);
    max_n = std::max(max_n, L.num_interior());
    // each bound normalized so that 1 is the limit
    const double res = rel_residual(sys, r.x) / 1e-10;
    const double mono = r.monotonicity_violation / (1e-12 * (1 + r.x.cwiseAbs().maxCoeff()));
    const double iters = r.iterations / 50.0;
    t.add(std::max({res, mono, iters}));
  }
  t.r.detail = "max N " + std::to_string(max_n) + ", max iterations " + std::to_string(max_iter);
  return t.done();
}

OracleResult verify_isaacs(const VerifyOptions& opt, int trials) {
  Tally t("two-level-howard", 1);
  std::mt19937_64 rng(stream_seed(opt, 4));
  std::uniform_int_distribution<int> NC(1, 3), NH(4, 14);
  std::uniform_real_distribution<double> K(0.5, 2), F(-1, 1);
  int mismatches = 0, oracle_misses = 0;
  for (int k = 0; k < trials; ++k) {
    auto L = Lattice::build(box(1), 2.0 / NH(rng));
    std::vector<Mat2> A;
    std::vector<ScalarField> f;
    const int na = NC(rng), nb = NC(rng);
    const auto sys = assemble_bellman(random_control_problem(rng, L, na, nb, A, f));
    const auto r = two_level_howard(sys);
    const double res = rel_residual(sys, r.x) / 1e-10;

    const auto single = assemble_bellman(random_control_problem(rng, L, NC(rng), 1, A, f));
    const bool same = howard_solve(single).x == two_level_howard(single).x;
    mismatches += !same;

    // one unknown, two by two controls: the root is one of the four candidate ratios
    std::vector<SparseRows> Ks;
    std::vector<Eigen::VectorXd> fs;
    double kk[4], ff[4];
    for (int c = 0; c < 4; ++c) {
      kk[c] = K(rng);
      ff[c] = F(rng);
      SparseRows m(1, 1);
      m.insert(0, 0) = kk[c];
      Ks.push_back(m);
      fs.push_back(Eigen::VectorXd::Constant(1, ff[c]));
    }
    auto value = [&](double x) {
      return std::min(std::max(kk[0] * x - ff[0], kk[1] * x - ff[1]), std::max(kk[2] * x - ff[2], kk[3] * x - ff[3]));
    };
    double oracle = 0, best = INFINITY;
    for (int c = 0; c < 4; ++c)
      if (std::abs(value(ff[c] / kk[c])) < best) best = std::abs(value(ff[c] / kk[c])), oracle = ff[c] / kk[c];
    const double got = two_level_howard(BellmanSystem(2, 2, Ks, fs)).x[0];
    oracle_misses += got != oracle;

    t.add(std::max(res, (same && got == oracle) ? 0.0 : 2.0));
  }
  t.r.detail = std::to_string(mismatches) + " singleton mismatches, " + std::to_string(oracle_misses) +
               " scalar oracle misses";
  return t.done();
}

OracleResult verify_richardson(const VerifyOptions& opt, int trials) {
  Tally t("richardson", 1e-7);
  std::mt19937_64 rng(stream_seed(opt, 5));
  std::uniform_int_distribution<int> NA(1, 3), NH(4, 10);
  double worst_ratio = 0;
  for (int k = 0; k < trials; ++k) {
    auto L = Lattice::build(box(1), 2.0 / NH(rng));
    std::vector<Mat2> A;
    std::vector<ScalarField> f;
    const auto sys = assemble_bellman(random_control_problem(rng, L, NA(rng), 1, A, f));
    const auto h = howard_solve(sys);
    const auto r = richardson_solve(sys, std::nullopt, 0, {1e-13, 1000000});
    worst_ratio = std::max(worst_ratio, r.contraction);
    const double gap = (h.x - r.x).cwiseAbs().maxCoeff();
    t.add(r.contraction < 1 ? gap : INFINITY);
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "max contraction %.6f", worst_ratio);
  t.r.detail = buf;
  return t.done();
}

OracleResult verify_hexagon(const VerifyOptions& opt, int trials) {
  Tally t("hexagon-gamma", 1e-10);
  std::mt19937_64 rng(stream_seed(opt, 6));
  const auto bases = enumerate_superbases(2);
  std::uniform_int_distribution<std::size_t> pick(0, bases.size() - 1);
  std::uniform_int_distribution<int> NH(8, 24);
  while (t.r.trials < trials) {
    const double h = 2.0 / NH(rng);
    auto L = Lattice::build(box(1), h);
    const auto v = generate_convex_nodal(rng(), L);
    for (int s = 0; s < 10 && t.r.trials < trials; ++s) {
      const auto& sb = bases[pick(rng)];
      const std::size_t z = std::uniform_int_distribution<std::size_t>(0, L.num_interior() - 1)(rng);
      const IVec2 c = L.coords(z);
      std::array<double, 3> d{};
      bool inside = true;
      for (int i = 0; i < 3 && inside; ++i) {
        const auto a = L.node_at(c + sb.y[std::size_t(i)]), b = L.node_at(c - sb.y[std::size_t(i)]);
        if (!a || !b) inside = false;
        else d[std::size_t(i)] = v[*a] + v[*b] - 2 * v[z];
      }
      if (!inside) continue;
      // symmetric hexagon: z and z +- h y_i carrying v(z) + d_i / 2
      std::vector<Vec2> pts = {L.point(z)};
      std::vector<double> vals = {v[z]};
      for (int i = 0; i < 3; ++i)
        for (int sg : {1, -1}) {
          pts.push_back(L.point(z) + sg * h * L.direction(sb.y[std::size_t(i)]));
          vals.push_back(v[z] + 0.5 * d[std::size_t(i)]);
        }
      const std::vector<std::size_t> cand = {1, 2, 3, 4, 5, 6};
      const auto sp = support_polygon(pts, vals, 0, cand, 1e3);
      const double area = h * h * sp.polygon.area();
      const double gamma = (opt.flip_gamma_sign ? -1.0 : 1.0) * bcm_gamma(d[0], d[1], d[2]);
      t.add(sp.bounded ? std::abs(gamma - area) / std::max(std::abs(area), 1e-300) : INFINITY);
    }
  }
  return t.done();
}

OracleResult verify_monotone_iff_nonnegative(const VerifyOptions& opt, int trials) {
  // Operators sum_y w_y delta^2_y at one node; monotone is probed, nonnegative is read off the weights.
  Tally t("monotone-iff-nonnegative", 0);
  std::mt19937_64 rng(stream_seed(opt, 7));
  std::uniform_real_distribution<double> U(-1, 1), W(0, 1);
  auto L = Lattice::build(box(1), 0.25);
  const auto stencil = enumerate_stencil(2);
  const std::size_t z = *L.locate(Vec2(0, 0));
  int nonneg_count = 0;
  for (int k = 0; k < trials; ++k) {
    std::vector<std::pair<IVec2, double>> w;
    for (const auto& y : stencil.directions)
      if (y == sign_normalize(y) && W(rng) < 0.5) w.emplace_back(y, W(rng));
    if (w.empty()) w.emplace_back(IVec2{1, 0}, 1.0);
    if (k % 2) w[std::size_t(rng() % w.size())].second *= -1;
    bool nonneg = true;
    for (const auto& [y, c] : w) nonneg &= c >= 0;
    nonneg_count += nonneg;
    auto Lz = [&](const NodalFunction& u) {
      double s = 0;
      for (const auto& [y, c] : w) s += c * second_difference(u, z, y, L.h());
      return s;
    };
    // u - v has a nonnegative maximum at z: random pairs, then single-node dips
    bool monotone = true;
    for (int pair = 0; pair < 20; ++pair) {
      NodalFunction u(L), v(L);
      double mx = -1e300;
      for (std::size_t i = 0; i < L.num_nodes(); ++i) {
        u[i] = U(rng);
        v[i] = U(rng);
        mx = std::max(mx, u[i] - v[i]);
      }
      u[z] = v[z] + mx + W(rng);
      monotone &= Lz(u) <= Lz(v) + 1e-12;
    }
    const NodalFunction zero(L);
    for (const auto& [y, c] : w)
      for (const IVec2& s : {y, -y}) {
        NodalFunction u(L);
        u[*L.node_at(L.coords(z) + s)] = -1;
        monotone &= Lz(u) <= Lz(zero) + 1e-12;
      }
    t.add(monotone == nonneg ? 0.0 : 1.0);
  }
  t.r.detail = std::to_string(nonneg_count) + " nonnegative operators";
  return t.done();
}

OracleResult verify_comparison(const VerifyOptions& opt, int trials) {
  Tally t("discrete-comparison", 1e-12);
  std::mt19937_64 rng(stream_seed(opt, 8));
  std::uniform_real_distribution<double> U(0, 1);
  auto L = Lattice::build(box(1), 0.125);
  for (int k = 0; k < trials; ++k) {
    const Mat2 A = random_spd(rng, 10);
    const ScalarField gu = random_field(rng, 1), fu = random_field(rng, 3);
    const double a = U(rng), b = U(rng);
    ScalarField gv = [=](const Vec2& x) { return gu(x) + a * (1 + x.x() * x.x()); };
    ScalarField fv = [=](const Vec2& x) { return fu(x) - b * (1 + x.y() * x.y()); };
    auto Af = [&](const Vec2& x) { return A * (1 + 0.3 * x.squaredNorm()); };
    const auto u = solve_monotone_linear(assemble_linear(L, Af, fu, gu, 3));
    const auto v = solve_monotone_linear(assemble_linear(L, Af, fv, gv, 3));
    t.add(std::max(0.0, (u.values() - v.values()).maxCoeff()));
  }
  return t.done();
}

OracleResult verify_brunn_minkowski(const VerifyOptions& opt, int trials) {
  Tally t("brunn-minkowski", 1e-9);
  std::mt19937_64 rng(stream_seed(opt, 9));
  auto L = Lattice::build(box(1), 0.25);
  std::uniform_int_distribution<std::size_t> Z(0, L.num_interior() - 1);
  for (int k = 0; k < trials; ++k) {
    const auto v = generate_convex_nodal(rng(), L);
    const auto w = generate_convex_nodal(rng(), L);
    const NodalFunction s(L, v.values() + w.values());
    const std::size_t z = Z(rng);
    const double av = subdifferential(v, z).area, aw = subdifferential(w, z).area;
    const double as = subdifferential(s, z).area;
    t.add(std::max(0.0, std::sqrt(av) + std::sqrt(aw) - std::sqrt(as)));
  }
  return t.done();
}

OracleResult verify_op_maximum_principle(const VerifyOptions& opt, int trials) {
  // more mass and lower boundary data give a lower solution
  Tally t("op-maximum-principle", 1e-8);
  std::mt19937_64 rng(stream_seed(opt, 10));
  std::uniform_real_distribution<double> U(0, 1);
  auto L = Lattice::build(box(1), 0.25);
  OpOptions o;
  o.window = 0;
  for (int k = 0; k < trials; ++k) {
    const Mat2 M = random_spd(rng, 4);
    const double c1 = U(rng), c2 = U(rng), lift = 0.5 * U(rng);
    ScalarField g2 = [=](const Vec2& x) { return 0.5 * x.dot(M * x) + c1 * x.x(); };
    ScalarField g1 = [=](const Vec2& x) { return g2(x) - lift * (1 + x.y()); };
    ScalarField f2 = [=](const Vec2& x) { return c2 * (1 + x.x() * x.x()); };
    ScalarField f1 = [=](const Vec2& x) { return f2(x) + c1 * (1 + x.y() * x.y()); };
    const auto u1 = op_solve(MAProblem::with_density(L, f1, g1), o);
    const auto u2 = op_solve(MAProblem::with_density(L, f2, g2), o);
    const double scale = 1 + u2.sup_norm();
    t.add(std::max(0.0, (u1.values() - u2.values()).maxCoeff()) / scale);
  }
  return t.done();
}

std::vector<OracleResult> run_verification(const VerifyOptions& opt) {
  return {verify_quadratic_exactness(opt),      verify_fd_consistency(opt), verify_howard(opt),
          verify_isaacs(opt),                   verify_richardson(opt),     verify_hexagon(opt),
          verify_monotone_iff_nonnegative(opt), verify_comparison(opt),     verify_brunn_minkowski(opt),
          verify_op_maximum_principle(opt)};
}

void print_summary(const std::vector<OracleResult>& results, std::ostream& out, bool with_seconds) {
  char line[256];
  std::snprintf(line, sizeof line, "%-26s %7s %6s %11s %9s %s", "oracle", "trials", "fails", "worst", "tol",
                with_seconds ? "seconds" : "");
  out << line << '\n';
  for (const auto& r : results) {
    std::snprintf(line, sizeof line, "%-26s %7d %6d %11.3e %9.1e", r.name.c_str(), r.trials, r.violations, r.worst,
                  r.tol);
    out << line;
    if (with_seconds) {
      std::snprintf(line, sizeof line, " %7.2f", r.seconds);
      out << line;
    }
    out << "  " << (r.passed() ? "PASS" : "FAIL");
    if (!r.detail.empty()) out << "  " << r.detail;
    out << '\n';
  }
}

}  // namespace ellipsol
