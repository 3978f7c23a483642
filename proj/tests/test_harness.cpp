#include "doctest.h"
#include "ellipsol/harness.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

using namespace ellipsol;

namespace {

// Hessians written out by hand, independent of the case definitions.
Mat2 hessian_smooth(const Vec2& x) { return std::exp(0.5 * x.squaredNorm()) * (Mat2::Identity() + x * x.transpose()); }

Mat2 hessian_c11(const Vec2& x) {
  const double r = x.norm();
  if (r <= 1) return Mat2::Zero();
  const Vec2 n = x / r;
  return (1 - 1 / r) * (Mat2::Identity() - n * n.transpose()) + n * n.transpose();
}

Mat2 hessian_sin(const Vec2& x) {
  const double pi = std::numbers::pi;
  const double sx = std::sin(pi * x.x()), sy = std::sin(pi * x.y());
  const double cx = std::cos(pi * x.x()), cy = std::cos(pi * x.y());
  Mat2 H;
  H << -sx * sy, cx * cy, cx * cy, -sx * sy;
  return pi * pi * H;
}

Vec2 sample(std::mt19937_64& rng, const ManufacturedCase& c) {
  std::uniform_real_distribution<double> U(0, 1);
  return c.lo + (c.hi - c.lo).cwiseProduct(Vec2(U(rng), U(rng)));
}

}  // namespace

TEST_CASE("fit_rate on exact power laws") {
  const std::vector<double> h = {0.25, 0.125, 0.0625};
  CHECK(fit_rate(h, h) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit_rate(h, {h[0] * h[0], h[1] * h[1], h[2] * h[2]}) == doctest::Approx(2.0).epsilon(1e-12));
  // slope of the least-squares line through the three log points, worked by hand
  const double x0 = std::log(0.25), x1 = std::log(0.125), x2 = std::log(0.0625);
  const double y0 = std::log(1e-1), y1 = std::log(2.6e-2), y2 = std::log(6.5e-3);
  const double xm = (x0 + x1 + x2) / 3, ym = (y0 + y1 + y2) / 3;
  const double slope = ((x0 - xm) * (y0 - ym) + (x1 - xm) * (y1 - ym) + (x2 - xm) * (y2 - ym)) /
                       ((x0 - xm) * (x0 - xm) + (x1 - xm) * (x1 - xm) + (x2 - xm) * (x2 - xm));
  const double r = fit_rate(h, {1e-1, 2.6e-2, 6.5e-3});
  CHECK(r == doctest::Approx(slope).epsilon(1e-12));
  CHECK(r == doctest::Approx(1.97).epsilon(0.01));
  CHECK(std::isnan(fit_rate(h, {1e-1, 0.0, 1e-3})));
  CHECK(std::isnan(fit_rate({0.5}, {0.1})));
}

TEST_CASE("built-in Monge-Ampere cases solve their own equation") {
  std::mt19937_64 rng(11);
  for (const char* name : {"smooth-ma", "c11-ma"}) {
    const auto c = builtin_case(name);
    const auto H = std::string(name) == "smooth-ma" ? hessian_smooth : hessian_c11;
    double worst = 0;
    for (int k = 0; k < 10000; ++k) {
      const Vec2 x = sample(rng, c);
      worst = std::max(worst, std::abs(H(x).determinant() - c.density(x)) / (1 + c.density(x)));
    }
    CHECK(worst <= 1e-8);
    for (int k = 0; k < 100; ++k) {
      const Vec2 x = sample(rng, c);
      CHECK(c.exact(x) == c.boundary(x));
    }
  }
}

TEST_CASE("the HJB case is solved with both controls active somewhere") {
  const auto c = builtin_case("hjb-smooth");
  std::mt19937_64 rng(5);
  double worst = 0;
  int active[2] = {0, 0};
  for (int k = 0; k < 10000; ++k) {
    const Vec2 x = sample(rng, c);
    const Mat2 H = hessian_sin(x);
    double best = -1e300;
    int arg = 0;
    for (int a = 0; a < 2; ++a) {
      const double v = c.control_source(a, x) - c.controls[std::size_t(a)].cwiseProduct(H).sum();
      if (v > best) best = v, arg = a;
    }
    worst = std::max(worst, std::abs(best));
    ++active[arg];
  }
  CHECK(worst <= 1e-8);
  CHECK(active[0] > 3000);
  CHECK(active[1] > 3000);
}

TEST_CASE("scheme names round-trip and unknown cases throw") {
  for (Scheme s : {Scheme::Op, Scheme::Bcm, Scheme::Fj, Scheme::HjbHoward, Scheme::Isaacs2lh, Scheme::Richardson,
                   Scheme::Linear})
    CHECK(parse_scheme(to_string(s)) == s);
  CHECK_FALSE(parse_scheme("newton"));
  CHECK_THROWS_AS(builtin_case("nope"), Error);
  for (const auto& n : case_names()) CHECK_NOTHROW(builtin_case(n));
  CHECK_FALSE(builtin_case("smooth-ma").supports(Scheme::HjbHoward));
  CHECK_FALSE(builtin_case("hjb-smooth").supports(Scheme::Linear));
  CHECK(builtin_case("poisson").supports(Scheme::Linear));
}

TEST_CASE("linear and HJB studies converge at second order") {
  const std::vector<double> h = {0.125, 0.0625, 0.03125};
  auto lin = run_convergence(builtin_case("poisson"), Scheme::Linear, h);
  REQUIRE_FALSE(lin.failure);
  CHECK(lin.rate == doctest::Approx(2.0).epsilon(0.05));
  CHECK(lin.in_window());
  for (Scheme s : {Scheme::HjbHoward, Scheme::Isaacs2lh}) {
    auto r = run_convergence(builtin_case("hjb-smooth"), s, h);
    REQUIRE_FALSE(r.failure);
    CHECK(r.in_window());
    CHECK(r.rate <= 2.3);
    for (std::size_t i = 1; i < r.errors.size(); ++i) CHECK(r.errors[i] < r.errors[i - 1]);
  }
}

TEST_CASE("reports are deterministic") {
  const std::vector<double> h = {0.25, 0.125};
  auto a = run_convergence(builtin_case("smooth-ma"), Scheme::Op, h);
  auto b = run_convergence(builtin_case("smooth-ma"), Scheme::Op, h);
  CHECK(a.errors == b.errors);
  CHECK(a.iterations == b.iterations);
  CHECK(a.rate == b.rate);
}

TEST_CASE("bad level lists are rejected") {
  const auto c = builtin_case("poisson");
  CHECK_THROWS_AS(run_convergence(c, Scheme::Linear, {0.125}), Error);
  CHECK_THROWS_AS(run_convergence(c, Scheme::Linear, {0.125, 0.1}), Error);
  CHECK_THROWS_AS(run_convergence(c, Scheme::Op, {0.25, 0.125}), Error);
}

TEST_CASE("a failing level ends the study with a partial report") {
  auto c = builtin_case("smooth-ma");
  c.boundary = [](const Vec2& x) { return -x.squaredNorm(); };
  auto r = run_convergence(c, Scheme::Op, {0.25, 0.125});
  REQUIRE(r.failure);
  CHECK(r.failure_kind == ErrorKind::NoConvexSubsolution);
  CHECK(r.errors.empty());
  CHECK_FALSE(r.in_window());
}

TEST_CASE("point-mass case converges with the full candidate set") {
  auto r = run_convergence(builtin_case("point-mass"), Scheme::Op, {0.25, 0.125, 0.0625});
  REQUIRE_FALSE(r.failure);
  CHECK(r.in_window());
}

TEST_CASE("generated convex nodal functions") {
  auto L = Lattice::build(Domain::box(Vec2(-1, -1), Vec2(1, 1)), 0.25);
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto v = generate_convex_nodal(seed, L);
    REQUIRE(is_convex_nodal(v));
    if (seed % 100 == 0) {
      CHECK(generate_convex_nodal(seed, L).values() == v.values());
      const auto env = lower_envelope(v);
      for (std::size_t i = 0; i < L.num_nodes(); ++i) CHECK(env.node_values[i] == doctest::Approx(v[i]).epsilon(1e-12));
    }
  }
  CHECK(generate_convex_nodal(1, L).values() != generate_convex_nodal(2, L).values());
}

TEST_CASE("report CSV") {
  ConvergenceReport r;
  r.case_name = "x";
  r.scheme = Scheme::Bcm;
  r.h = {0.5, 0.25};
  r.errors = {0.25, 0.0625};
  r.seconds = {0.1, 0.2};
  const std::string path = (std::filesystem::temp_directory_path() / "ellipsol_report_test.csv").string();
  write_report_csv({r}, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "case,scheme,h,sup_error,rate_cum,seconds");
  std::getline(in, line);
  CHECK(line == "x,bcm,0.5,0.25,nan,0.1");
  std::getline(in, line);
  CHECK(line == "x,bcm,0.25,0.0625,2,0.2");
}
