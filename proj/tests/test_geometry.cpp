#include "doctest.h"
#include "ellipsol/geometry.hpp"

#include <random>

using namespace ellipsol;

TEST_CASE("box clip keeps labels of cutting lines") {
  auto p = ConvexPolygon::box(Vec2(0, 0), 1.0);
  CHECK(p.area() == doctest::Approx(4.0));
  p.clip(Vec2(1, 1), 0.0, 7);
  CHECK(p.area() == doctest::Approx(2.0));
  int labelled = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p.edge_label(i) == 7) {
      ++labelled;
      CHECK(p.edge_length(i) == doctest::Approx(2 * std::sqrt(2.0)));
    }
  CHECK(labelled == 1);
  CHECK(p.touches_box());
}

TEST_CASE("clipping through a vertex does not create duplicates") {
  auto p = ConvexPolygon::box(Vec2(0, 0), 1.0);
  p.clip(Vec2(1, 1), 2.0, 3);  // touches the corner (1,1) only
  CHECK(p.size() == 4);
  p.clip(Vec2(1, 0), 1.0, 4);  // coincides with an edge
  CHECK(p.size() == 4);
  p.clip(Vec2(-1, 0), -2.0, 5);
  CHECK(p.size() == 0);
  CHECK(p.area() == 0.0);
}

TEST_CASE("clipping to a point keeps the point") {
  auto p = ConvexPolygon::box(Vec2(0, 0), 1.0);
  p.clip(Vec2(1, 0), 0.0, 0);
  p.clip(Vec2(-1, 0), 0.0, 1);
  p.clip(Vec2(0, 1), 0.0, 2);
  p.clip(Vec2(0, -1), 0.0, 3);
  REQUIRE(p.size() == 1);
  CHECK(p.vertices()[0].norm() < 1e-15);
}

TEST_CASE("convex hull drops interior and collinear points") {
  std::vector<Vec2> pts = {{0, 0}, {1, 0}, {2, 0}, {2, 2}, {0, 2}, {1, 1}, {0, 1}};
  auto hull = convex_hull(pts);
  CHECK(hull.size() == 4);
  CHECK(polygon_area(hull) == doctest::Approx(4.0));
}

TEST_CASE("minkowski sum area of two squares") {
  auto a = ConvexPolygon::box(Vec2(0, 0), 1.0);
  auto b = ConvexPolygon::box(Vec2(3, 0), 0.5);
  auto s = minkowski_sum(a, b);
  CHECK(s.area() == doctest::Approx(9.0));
  CHECK(s.centroid().x() == doctest::Approx(3.0));
}

TEST_CASE("random clipping matches hull of surviving box corners and intersections") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-1, 1);
  for (int trial = 0; trial < 200; ++trial) {
    auto p = ConvexPolygon::box(Vec2(0, 0), 1.0);
    const Vec2 n(U(rng), U(rng));
    const double c = 0.3 * U(rng);
    p.clip(n, c, 1);
    // Monte Carlo style check at grid points
    for (int i = -10; i <= 10; ++i)
      for (int j = -10; j <= 10; ++j) {
        const Vec2 x(i / 10.0, j / 10.0);
        const double s = n.dot(x) - c;
        if (std::abs(s) < 1e-9) continue;
        CHECK(p.contains(x, 1e-12) == (s < 0));
      }
  }
}
