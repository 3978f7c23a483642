#include "doctest.h"
#include "ellipsol/harness.hpp"
#include "ellipsol/monge_ampere.hpp"

#include <cmath>
#include <random>

using namespace ellipsol;

namespace {

Domain square(double r) { return Domain::box(Vec2(-r, -r), Vec2(r, r)); }

double half_sq(const Vec2& x) { return 0.5 * x.squaredNorm(); }

double one(const Vec2&) { return 1.0; }

double max_error(const NodalFunction& u, const ScalarField& exact) {
  double e = 0;
  for (std::size_t i = 0; i < u.size(); ++i) e = std::max(e, std::abs(u[i] - exact(u.lattice().point(i))));
  return e;
}

// Random strictly convex function: quadratic plus a max of affine pieces smoothed by the quadratic.
ScalarField random_convex_function(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-1, 1), P(0.2, 2);
  Mat2 A;
  A << P(rng), 0, 0, P(rng);
  const double c = U(rng) * 0.5;
  A(0, 1) = A(1, 0) = c * std::sqrt(A(0, 0) * A(1, 1));
  std::vector<Vec2> g;
  std::vector<double> b;
  for (int k = 0; k < 3; ++k) {
    g.emplace_back(U(rng), U(rng));
    b.push_back(U(rng));
  }
  return [A, g, b](const Vec2& x) {
    double m = -1e300;
    for (std::size_t k = 0; k < g.size(); ++k) m = std::max(m, g[k].dot(x) + b[k]);
    return 0.5 * x.dot(A * x) + m;
  };
}

}  // namespace

TEST_CASE("gamma branches") {
  CHECK(bcm_gamma(2, 2, 2) == 3.0);
  CHECK(bcm_gamma(4, 1, 1) == 1.0);
  CHECK(bcm_gamma(1, 4, 1) == 1.0);
  CHECK(bcm_gamma(5, 0, 0) == 0.0);
  CHECK(bcm_gamma(2, 1, 1) == 1.0);
  // branches agree on the switching surface
  CHECK(bcm_gamma(3, 1, 2) == doctest::Approx(2.0));
}

TEST_CASE("subdifferential residual of the half squared norm") {
  auto L = Lattice::build(square(1), 0.125);
  auto p = MAProblem::with_density(L, one, half_sq);
  auto u = NodalFunction::interpolate(L, half_sq);
  auto r = op_residual(p, u);
  int far = 0;
  for (std::size_t z = 0; z < L.num_interior(); ++z)
    if (L.distance_to_boundary(z) >= L.r_bar() * L.h()) {
      CHECK(std::abs(r[long(z)]) <= 1e-12 * L.cell_measure(z));
      ++far;
    }
  CHECK(far > 0);
  for (std::size_t b = L.num_interior(); b < L.num_nodes(); ++b) CHECK(r[long(b)] == 0.0);
}

TEST_CASE("affine data carries no mass") {
  auto L = Lattice::build(square(1), 0.25);
  auto affine = [](const Vec2& x) { return 0.3 * x.x() - x.y() + 2; };
  auto p = MAProblem::with_density(L, one, affine);
  auto u = NodalFunction::interpolate(L, affine);
  auto r = op_residual(p, u);
  auto rb = bcm_residual(p, u);
  for (std::size_t z = 0; z < L.num_interior(); ++z) {
    CHECK(r[long(z)] == doctest::Approx(-p.mass[long(z)]).epsilon(1e-12));
    CHECK(rb[long(z)] == doctest::Approx(-1.0).epsilon(1e-12));
  }
}

TEST_CASE("cone on the cross carries its point mass") {
  LatticeOptions opt;
  opt.densify_boundary = false;
  auto L = Lattice::build(Domain::polygon({{1, 0}, {0, 1}, {-1, 0}, {0, -1}}), 1.0, Mat2::Identity(), opt);
  auto cone = [](const Vec2& x) { return x.norm(); };
  auto p = MAProblem::with_point_masses(L, {{0, 4.0}}, cone);
  auto r = op_residual(p, NodalFunction::interpolate(L, cone));
  CHECK(std::abs(r[0]) < 1e-12);
}

TEST_CASE("superbasis residual of the half squared norm vanishes") {
  auto L = Lattice::build(square(1), 0.125);
  auto p = MAProblem::with_density(L, one, half_sq);
  auto u = NodalFunction::interpolate(L, half_sq);
  for (int m : {1, 2}) {
    auto r = bcm_residual(p, u, m);
    CHECK(r.cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("gamma equals the hexagon subdifferential area") {
  std::mt19937_64 rng(41);
  const auto bases = enumerate_superbases(2);
  std::uniform_int_distribution<std::size_t> pick(0, bases.size() - 1);
  std::uniform_real_distribution<double> U(-1, 1);
  const double h = 0.1;
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    auto f = random_convex_function(rng);
    const auto& sb = bases[pick(rng)];
    const Vec2 z(U(rng), U(rng));
    double d[3];
    for (int i = 0; i < 3; ++i) {
      const Vec2 y = sb.y[std::size_t(i)].to_real();
      d[i] = f(z + h * y) + f(z - h * y) - 2 * f(z);
    }
    // symmetric hexagon data around z
    std::vector<Vec2> pts = {z};
    std::vector<double> vals = {f(z)};
    for (int i = 0; i < 3; ++i)
      for (int s : {1, -1}) {
        pts.push_back(z + s * h * sb.y[std::size_t(i)].to_real());
        vals.push_back(f(z) + 0.5 * d[i]);
      }
    std::vector<std::size_t> cand = {1, 2, 3, 4, 5, 6};
    auto sp = support_polygon(pts, vals, 0, cand, 1e3);
    REQUIRE(sp.bounded);
    const double gamma = bcm_gamma(d[0], d[1], d[2]);
    const double area = h * h * sp.polygon.area();
    CHECK(std::abs(gamma - area) <= 1e-10 * std::max(gamma, 1e-300));
    ++checked;
  }
  CHECK(checked == 300);
}

TEST_CASE("control set members") {
  auto s = FjControlSet::make();
  REQUIRE(!s.controls.empty());
  CHECK(s.controls.front().matrix().isApprox(0.5 * Mat2::Identity()));
  for (const auto& c : s.controls) {
    const Mat2 B = c.matrix();
    CHECK(std::abs(B.trace() - 1) < 1e-14);
    Eigen::SelfAdjointEigenSolver<Mat2> es(B);
    CHECK(es.eigenvalues().minCoeff() >= -1e-14);
  }
  CHECK_THROWS_AS(FjControlSet::make(0, 4), Error);
}

TEST_CASE("semi-Lagrangian residual signs") {
  auto L = Lattice::build(square(1), 0.125);
  const auto set = FjControlSet::make(8, 8);
  SUBCASE("half squared norm with unit density") {
    auto p = MAProblem::with_density(L, one, half_sq);
    auto r = fj_residual(p, NodalFunction::interpolate(L, half_sq), L.h(), set);
    CHECK(r.cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("zero density and convex data") {
    auto g = [](const Vec2& x) { return x.x() * x.x() + 0.5 * std::exp(x.y()); };
    auto p = MAProblem::with_density(L, [](const Vec2&) { return 0.0; }, g);
    auto r = fj_residual(p, NodalFunction::interpolate(L, g), std::sqrt(L.h()), set);
    CHECK(r.head(long(L.num_interior())).maxCoeff() <= 1e-12);
  }
  SUBCASE("concave spike is flagged") {
    auto p = MAProblem::with_density(L, one, half_sq);
    auto u = NodalFunction::interpolate(L, half_sq);
    const auto z = *L.node_at({0, 0});
    u[z] += 0.5;
    auto r = fj_residual(p, u, L.h(), set);
    CHECK(r[long(z)] > 0.1);
  }
  CHECK_THROWS_AS(fj_system(MAProblem::with_density(L, one, half_sq), L.h(), FjControlSet{}), Error);
}

TEST_CASE("raising one value never raises the semi-Lagrangian residual elsewhere") {
  auto L = Lattice::build(square(1), 0.25);
  auto p = MAProblem::with_density(L, one, half_sq);
  const auto sys = fj_system(p, std::sqrt(L.h()), FjControlSet::make(6, 6));
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(-1, 1), up(0, 1);
  std::uniform_int_distribution<std::size_t> node(0, L.num_interior() - 1);
  const long ni = long(L.num_interior());
  for (int trial = 0; trial < 500; ++trial) {
    Eigen::VectorXd x(ni);
    for (long i = 0; i < ni; ++i) x[i] = U(rng);
    const auto j = long(node(rng));
    Eigen::VectorXd y = x;
    y[j] += up(rng);
    const Eigen::VectorXd rx = bellman_residual(sys, x), ry = bellman_residual(sys, y);
    for (long i = 0; i < ni; ++i)
      if (i != j) CHECK(ry[i] <= rx[i] + 1e-14);
  }
}

TEST_CASE("subdifferential solver on smooth data") {
  auto exact = [](const Vec2& x) { return std::exp(0.5 * x.squaredNorm()); };
  auto f = [](const Vec2& x) { return (1 + x.squaredNorm()) * std::exp(x.squaredNorm()); };
  double prev = INFINITY;
  for (double h : {0.25, 0.125, 0.0625}) {
    auto L = Lattice::build(square(1), h);
    auto p = MAProblem::with_density(L, f, exact);
    MASolveInfo info;
    auto u = op_solve(p, {}, &info);
    CHECK(info.residual <= 1e-8);
    auto r = op_residual(p, u);
    for (std::size_t z = 0; z < L.num_interior(); ++z)
      CHECK(std::abs(r[long(z)]) <= 1e-8 * std::max(p.mass[long(z)], h * h));
    const double err = max_error(u, exact);
    CHECK(err < prev);
    prev = err;
  }
}

TEST_CASE("subdifferential solution is convex and sits below convex data") {
  auto L = Lattice::build(square(1), 0.2);
  auto exact = [](const Vec2& x) { return std::exp(0.5 * x.squaredNorm()); };
  auto p = MAProblem::with_density(L, [](const Vec2&) { return 2.0; }, exact);
  auto u = op_solve(p);
  auto env = lower_envelope(u);
  for (std::size_t i = 0; i < u.size(); ++i) CHECK(std::abs(env.node_values[i] - u[i]) <= 1e-12 * (1 + u.sup_norm()));
  CHECK(is_convex_nodal(u));
}

TEST_CASE("zero mass gives the envelope of the boundary data") {
  auto L = Lattice::build(square(1), 0.25);
  auto g = [](const Vec2& x) { return x.x() * x.x() + 0.5 * x.y(); };
  auto p = MAProblem::with_density(L, [](const Vec2&) { return 0.0; }, g);
  auto u = op_solve(p);
  CHECK(max_error(u, g) < 1e-6);
  auto ub = bcm_solve(p);
  CHECK(max_error(ub, g) < 1e-6);
}

TEST_CASE("boundary data without a convex extension is rejected") {
  auto L = Lattice::build(square(1), 0.25);
  auto g = [](const Vec2& x) { return -x.x() * x.x(); };
  auto p = MAProblem::with_density(L, one, g);
  try {
    op_solve(p);
    FAIL("expected NoConvexSubsolution");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NoConvexSubsolution);
  }
}

TEST_CASE("cone with a point mass") {
  auto cone = [](const Vec2& x) { return x.norm() - 1; };
  double prev = INFINITY;
  for (double h : {0.25, 0.125, 0.0625}) {
    auto L = Lattice::build(square(1), h);
    auto p = MAProblem::with_point_masses(L, {{*L.node_at({0, 0}), M_PI}}, cone);
    auto u = op_solve(p, {0});
    const double err = max_error(u, cone);
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("Newton and sweeps agree") {
  auto L = Lattice::build(square(1), 0.25);
  auto exact = [](const Vec2& x) { return std::exp(0.5 * x.squaredNorm()); };
  auto f = [](const Vec2& x) { return (1 + x.squaredNorm()) * std::exp(x.squaredNorm()); };
  auto p = MAProblem::with_density(L, f, exact);
  auto a = op_solve(p);
  auto b = op_gauss_seidel(p, op_initial_guess(p));
  CHECK((a.values() - b.values()).cwiseAbs().maxCoeff() < 1e-7);
  auto c = bcm_solve(p);
  auto d = bcm_gauss_seidel(p, NodalFunction::interpolate(L, exact));
  CHECK((c.values() - d.values()).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("superbasis solver converges on smooth data") {
  auto exact = [](const Vec2& x) { return std::exp(0.5 * x.squaredNorm()); };
  auto f = [](const Vec2& x) { return (1 + x.squaredNorm()) * std::exp(x.squaredNorm()); };
  double prev = INFINITY;
  for (double h : {0.25, 0.125, 0.0625}) {
    auto L = Lattice::build(square(1), h);
    auto p = MAProblem::with_density(L, f, exact);
    MASolveInfo info;
    auto u = bcm_solve(p, {}, &info);
    CHECK(bcm_residual(p, u).cwiseAbs().maxCoeff() <= 1e-8 * (1 + 3 * std::exp(2.0)));
    const double err = max_error(u, exact);
    CHECK(err < prev);
    prev = err;
  }
}

TEST_CASE("semi-Lagrangian solver error decreases") {
  auto exact = [](const Vec2& x) { return std::exp(0.5 * x.squaredNorm()); };
  auto f = [](const Vec2& x) { return (1 + x.squaredNorm()) * std::exp(x.squaredNorm()); };
  const auto set = FjControlSet::make(8, 8);
  double prev = INFINITY;
  for (double h : {0.25, 0.125, 0.0625}) {
    auto L = Lattice::build(square(1), h);
    auto p = MAProblem::with_density(L, f, exact);
    auto u = fj_solve(p, std::sqrt(h), set);
    const double err = max_error(u, exact);
    CHECK(err < prev);
    prev = err;
  }
}

TEST_CASE("ordered data gives ordered subdifferential solutions") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> U(0, 1);
  auto L = Lattice::build(square(1), 0.25);
  for (int trial = 0; trial < 10; ++trial) {
    const double a = 0.5 + U(rng), s = U(rng);
    auto gv = [&](const Vec2& x) { return a * x.squaredNorm() + s; };
    auto gw = [&](const Vec2& x) { return a * x.squaredNorm(); };
    auto pv = MAProblem::with_density(L, [&](const Vec2&) { return 2 * a * a; }, gv);
    auto pw = MAProblem::with_density(L, [&](const Vec2&) { return 4 * a * a + U(rng); }, gw);
    auto v = op_solve(pv), w = op_solve(pw);
    CHECK((v.values() - w.values()).minCoeff() >= -1e-12);
  }
}

TEST_CASE("stability bound with a frozen constant") {
  // C measured once over these 200 pairs (max ratio 0.2860) and frozen
  const double C = 0.29;
  auto L = Lattice::build(square(1), 0.25);
  int active = 0;
  for (int t = 0; t < 200; ++t) {
    auto v = generate_convex_nodal(std::uint64_t(2 * t), L);
    auto w = generate_convex_nodal(std::uint64_t(2 * t + 1), L);
    double shift = -1e300;
    for (std::size_t i = L.num_interior(); i < L.num_nodes(); ++i) shift = std::max(shift, w[i] - v[i]);
    w.values().array() -= shift;
    const NodalFunction d(L, v.values() - w.values());
    const double lhs = std::max(0.0, -d.values().minCoeff());
    double sum = 0;
    for (std::size_t z : contact_set(d)) {
      const double av = subdifferential(v, z).area, aw = subdifferential(w, z).area;
      const double ad = subdifferential(d, z).area;
      // the envelope's cell plus the cell of w fits inside the cell of v
      CHECK(std::sqrt(av) + 1e-9 >= std::sqrt(aw) + std::sqrt(ad));
      sum += (std::sqrt(av) - std::sqrt(aw)) * (std::sqrt(av) - std::sqrt(aw));
    }
    if (lhs <= 1e-12) continue;
    ++active;
    CHECK(lhs <= C * std::sqrt(sum));
  }
  CHECK(active > 20);
}

TEST_CASE("the two determinant schemes agree to first order") {
  auto exact = [](const Vec2& x) { return std::exp(0.5 * x.squaredNorm()); };
  auto f = [](const Vec2& x) { return (1 + x.squaredNorm()) * std::exp(x.squaredNorm()); };
  for (double h : {0.25, 0.125, 0.0625}) {
    auto L = Lattice::build(square(1), h);
    auto p = MAProblem::with_density(L, f, exact);
    const double gap = (op_solve(p).values() - bcm_solve(p).values()).cwiseAbs().maxCoeff();
    CHECK(gap <= h);
  }
}
