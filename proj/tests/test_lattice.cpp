#include "doctest.h"
#include "ellipsol/lattice.hpp"

#include <algorithm>
#include <cmath>

using namespace ellipsol;

namespace {
Domain square(double a, double b) { return Domain::box(Vec2(a, a), Vec2(b, b)); }
}  // namespace

TEST_CASE("single cell lattice") {
  auto L = Lattice::build(square(-1, 1), 1.0);
  CHECK(L.num_interior() == 1);
  CHECK(L.num_boundary() == 8);
  CHECK(L.point(0).norm() == 0.0);
  CHECK(L.cell_measure(0) == doctest::Approx(1.0));
}

TEST_CASE("uniform refinement of the box") {
  auto L = Lattice::build(square(-1, 1), 0.5);
  CHECK(L.num_interior() == 9);
  for (std::size_t i = 0; i < L.num_interior(); ++i) CHECK(L.cell_measure(i) == doctest::Approx(0.25));
}

TEST_CASE("non-dyadic spacing on the unit box") {
  auto L = Lattice::build(square(0, 1), 0.7);
  REQUIRE(L.num_interior() == 1);
  CHECK((L.point(0) - Vec2(0.7, 0.7)).norm() < 1e-15);
  CHECK(L.num_boundary() == 8);
  // clipped cell: [0.35,1] x [0.35,1]
  CHECK(L.cell_measure(0) == doctest::Approx(0.65 * 0.65));
}

TEST_CASE("too coarse spacing has no interior nodes") {
  CHECK_THROWS_AS(Lattice::build(square(0, 1), 1.0), Error);
  try {
    Lattice::build(square(0, 1), 1.0);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NoInteriorNodes);
  }
}

TEST_CASE("lattice invariants on a polygon with a rotated basis") {
  auto D = Domain::polygon({{0, 0}, {3, 0.5}, {2.5, 2.5}, {-0.5, 2}});
  Mat2 B;
  B << 1, 0.5, 0, 1;
  auto L = Lattice::build(D, 0.13, B);
  const double h = L.h();
  double total = 0;
  for (std::size_t i = 0; i < L.num_nodes(); ++i) {
    if (L.is_interior(i)) {
      CHECK(D.signed_distance(L.point(i)) < 0);
      CHECK(L.cell_measure(i) > 0);
      total += L.cell_measure(i);
      const Vec2 c = B.inverse() * L.point(i) / h;
      CHECK(std::abs(c.x() - std::round(c.x())) < 1e-9);
      CHECK(std::abs(c.y() - std::round(c.y())) < 1e-9);
    } else {
      CHECK(std::abs(D.signed_distance(L.point(i))) <= 1e-12 * h + 1e-15);
      const Vec2 next = L.point(i + 1 < L.num_nodes() ? i + 1 : L.num_interior());
      CHECK((next - L.point(i)).norm() <= h * (1 + 1e-9));
    }
  }
  CHECK(total <= D.area() + 1e-12);
  CHECK(D.area() - total <= D.perimeter() * h);
}

TEST_CASE("translation invariance of far cells") {
  auto L = Lattice::build(square(-1, 1), 0.125);
  double ref = -1;
  for (std::size_t i = 0; i < L.num_interior(); ++i) {
    if (L.distance_to_boundary(i) <= 2 * L.h()) continue;
    if (ref < 0) ref = L.cell_measure(i);
    CHECK(L.cell_measure(i) == ref);
  }
}

TEST_CASE("stencil enumeration") {
  CHECK(enumerate_stencil(1).directions.size() == 8);
  CHECK(enumerate_stencil(2).directions.size() == 24);
  auto s = enumerate_stencil(1).directions;
  for (IVec2 y : {IVec2{1, 0}, IVec2{0, 1}, IVec2{1, 1}, IVec2{1, -1}}) {
    CHECK(std::find(s.begin(), s.end(), y) != s.end());
    CHECK(std::find(s.begin(), s.end(), -y) != s.end());
  }
}

TEST_CASE("superbases") {
  auto sb = enumerate_superbases(1);
  auto has = [&](Superbasis b) { return std::find(sb.begin(), sb.end(), canonicalize(b)) != sb.end(); };
  CHECK(has({{IVec2{-1, -1}, IVec2{1, 0}, IVec2{0, 1}}}));
  CHECK(has({{IVec2{1, -1}, IVec2{-1, 0}, IVec2{0, 1}}}));
  for (const auto& b : sb) {
    CHECK(std::abs(det(b.y[1], b.y[2])) == 1);
    CHECK(b.y[0] + b.y[1] + b.y[2] == IVec2{0, 0});
    CHECK(canonicalize(b) == b);
  }
  auto sb2 = enumerate_superbases(2);
  CHECK(sb2.size() > sb.size());
  for (const auto& b : sb2) CHECK(canonicalize(canonicalize(b)) == b);
}

TEST_CASE("shortened steps") {
  auto L = Lattice::build(square(0, 1), 0.1);
  auto centre = L.locate(Vec2(0.5, 0.5));
  REQUIRE(centre);
  auto [a, b] = shortened_step(L, *centre, {1, 0}, 0.1);
  CHECK(a == 0.1);
  CHECK(b == 0.1);
  auto [kp, km] = shortened_step(L.domain(), Vec2(0.9, 0.5), Vec2(1, 0), 0.2);
  CHECK(kp == doctest::Approx(0.1));
  CHECK(km == 0.2);
  auto [dp, dm] = shortened_step(L.domain(), Vec2(0.5, 0.5), Vec2(1, 1), 1.0);
  CHECK(dp == doctest::Approx(0.5));
  CHECK(dm == doctest::Approx(0.5));
  try {
    shortened_step(L, L.num_interior(), {1, 0}, 0.1);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NodeNotInterior);
  }
}

TEST_CASE("nodal function lookups") {
  auto L = Lattice::build(square(-1, 1), 0.5);
  auto u = NodalFunction::interpolate(L, [](const Vec2& x) { return x.squaredNorm(); });
  CHECK(u.at(Vec2(0.5, -0.5)) == 0.5);
  CHECK(u.at(Vec2(1, 1)) == 2.0);
  CHECK_THROWS_AS(u.at(Vec2(0.25, 0)), Error);
}
