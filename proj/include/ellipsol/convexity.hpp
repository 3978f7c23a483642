#pragma once

#include "ellipsol/lattice.hpp"

#include <array>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ellipsol {

/// Polygon of slopes p with v(x) - v(z) >= p.(x - z) for all candidate points x.
/// Constraint edges are labelled with the candidate's index. The polygon is
/// bounded inside a box; `bounded` is false when it still touches that box.
struct SupportPolygon {
  ConvexPolygon polygon;
  bool bounded = true;
};

SupportPolygon support_polygon(std::span<const Vec2> points, std::span<const double> values, std::size_t z,
                               std::span<const std::size_t> candidates, double box_half);

struct SubdifferentialCell {
  std::size_t node = 0;
  std::vector<Vec2> vertices;  // CCW; empty when no supporting plane exists
  double area = 0;
  bool bounded = true;
  /// (node, d area / d v(node)) for every constraint contributing an edge, plus z itself.
  std::vector<std::pair<std::size_t, double>> sensitivities;
};

/// Subdifferential of the nodal function at interior node z, using every node.
SubdifferentialCell subdifferential(const NodalFunction& v, std::size_t z);
/// Same, restricted to the given candidate nodes.
SubdifferentialCell subdifferential(const NodalFunction& v, std::size_t z, std::span<const std::size_t> candidates);

/// Starts from the nodes within `window` lattice steps and keeps adding the next ring of nodes
/// until a whole ring leaves the polygon uncut. Agrees with the full version whenever the
/// polygon is decided by nodes nearer than the first uncut ring.
SubdifferentialCell subdifferential_local(const NodalFunction& v, std::size_t z, int window);

/// For each interior node, the nodes whose lattice coordinates differ by at most W in max-norm.
std::vector<std::vector<std::size_t>> window_neighbors(const Lattice& lattice, int W);

struct DiscreteConvexEnvelope {
  std::vector<std::array<std::size_t, 3>> triangles;
  std::vector<Vec2> gradients;  // per triangle
  std::vector<Vec2> plane_gradients;
  std::vector<double> plane_intercepts;
  std::vector<double> node_values;  // envelope at the input points

  double operator()(const Vec2& x) const;
};

DiscreteConvexEnvelope lower_envelope(std::span<const Vec2> points, std::span<const double> values);
DiscreteConvexEnvelope lower_envelope(const NodalFunction& v);

/// Interior nodes where the envelope meets v.
std::vector<std::size_t> contact_set(const NodalFunction& v);

/// Every interior node has a supporting plane.
bool is_convex_nodal(const NodalFunction& v);

struct AlexandrovBound {
  double lhs = 0;      // sup of the negative part
  double rhs_raw = 0;  // sqrt of the summed subdifferential areas over the contact set
  std::vector<std::size_t> contact;
  double radius = 0;
};

AlexandrovBound alexandrov_bound(const NodalFunction& v);

void write_envelope_csv(const DiscreteConvexEnvelope& env, const std::string& path);
void write_cell_csv(const SubdifferentialCell& cell, const std::string& path);

}  // namespace ellipsol
