#pragma once

#include "ellipsol/error.hpp"
#include "ellipsol/geometry.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ellipsol {

/// Bounded convex polygon described both by CCW vertices and by unit-normal
/// half-planes normal.dot(x) <= offset.
class Domain {
 public:
  struct HalfPlane {
    Vec2 normal;
    double offset;
  };

  static Domain box(const Vec2& lo, const Vec2& hi);
  static Domain polygon(std::vector<Vec2> ccw_vertices);

  const std::vector<Vec2>& vertices() const { return vertices_; }
  const std::vector<HalfPlane>& half_planes() const { return planes_; }

  /// Signed distance: negative inside, positive outside (max over half-planes).
  double signed_distance(const Vec2& p) const;
  bool contains(const Vec2& p, double tol) const { return signed_distance(p) <= tol; }
  double area() const;
  double perimeter() const;
  double diameter() const;

  /// Largest t >= 0 with x + t v still in the closed domain (x assumed inside).
  double exit_length(const Vec2& x, const Vec2& v) const;

 private:
  std::vector<Vec2> vertices_;
  std::vector<HalfPlane> planes_;
};

enum class NodeKind { Interior, Boundary };

struct LatticeOptions {
  /// Insert extra boundary points so consecutive boundary nodes are at most h apart.
  bool densify_boundary = true;
  /// Ellipticity bounds entering the margin radius.
  double lambda = 1.0;
  double Lambda = 1.0;
};

class Lattice {
 public:
  static Lattice build(const Domain& domain, double h, const Mat2& basis = Mat2::Identity(),
                       const LatticeOptions& options = {});

  double h() const { return h_; }
  const Mat2& basis() const { return basis_; }
  const Domain& domain() const { return domain_; }

  std::size_t num_nodes() const { return points_.size(); }
  std::size_t num_interior() const { return num_interior_; }
  std::size_t num_boundary() const { return points_.size() - num_interior_; }
  bool is_interior(std::size_t i) const { return i < num_interior_; }
  NodeKind kind(std::size_t i) const { return is_interior(i) ? NodeKind::Interior : NodeKind::Boundary; }

  const Vec2& point(std::size_t i) const { return points_[i]; }
  const std::vector<Vec2>& points() const { return points_; }
  static constexpr int kOffLattice = INT32_MIN;
  /// Integer coordinates of node i; x == kOffLattice for boundary nodes between lattice points.
  IVec2 coords(std::size_t i) const { return coords_[i]; }
  bool is_lattice_point(std::size_t i) const { return coords_[i].x != kOffLattice; }
  double cell_measure(std::size_t i) const { return is_interior(i) ? cell_measure_[i] : 0.0; }
  double distance_to_boundary(std::size_t i) const { return -domain_.signed_distance(points_[i]); }

  /// Physical displacement of one lattice step along integer direction y (without h).
  Vec2 direction(const IVec2& y) const { return basis_ * y.to_real(); }
  Vec2 lattice_point(const IVec2& c) const { return h_ * (basis_ * c.to_real()); }

  /// Node at a lattice point, if that point is a node.
  std::optional<std::size_t> node_at(const IVec2& c) const;
  /// Node within a tiny tolerance of p, if any.
  std::optional<std::size_t> locate(const Vec2& p) const;

  /// Margin radius factor: nodes with distance_to_boundary >= r_bar() * h count as "far".
  double r_bar() const { return r_bar_; }
  /// h divided by the inradius of the reference cell.
  double shape_regularity() const { return sigma_; }

 private:
  Domain domain_;
  double h_ = 0;
  Mat2 basis_ = Mat2::Identity();
  Mat2 basis_inv_ = Mat2::Identity();
  std::size_t num_interior_ = 0;
  std::vector<Vec2> points_;
  std::vector<IVec2> coords_;
  std::vector<double> cell_measure_;
  std::unordered_map<IVec2, std::size_t, IVec2Hash> by_coords_;
  std::unordered_map<IVec2, std::vector<std::size_t>, IVec2Hash> by_bucket_;
  double bucket_ = 1;
  double r_bar_ = 0;
  double sigma_ = 0;
};

struct Stencil {
  int m = 0;
  std::vector<IVec2> directions;
};

/// Every nonzero y with |y|_inf <= m, ordered by (max-norm, then lexicographic).
Stencil enumerate_stencil(int m);

struct Superbasis {
  std::array<IVec2, 3> y;
  friend bool operator==(const Superbasis&, const Superbasis&) = default;
  friend auto operator<=>(const Superbasis&, const Superbasis&) = default;
};

/// Lexicographically smallest representative over permutations and a global sign.
Superbasis canonicalize(const Superbasis& s);
std::vector<Superbasis> enumerate_superbases(int m);

/// Step lengths k_plus, k_minus in (0, h_nominal] such that z +- k v stays in the closed
/// domain; v is the physical direction of a single step.
std::pair<double, double> shortened_step(const Domain& domain, const Vec2& z, const Vec2& v,
                                         double h_nominal);
std::pair<double, double> shortened_step(const Lattice& lattice, std::size_t node, const IVec2& y,
                                         double h_nominal);

/// Values on every node of one lattice.
class NodalFunction {
 public:
  NodalFunction() = default;
  explicit NodalFunction(const Lattice& lattice, double fill = 0.0)
      : lattice_(&lattice), values_(Eigen::VectorXd::Constant(lattice.num_nodes(), fill)) {}
  NodalFunction(const Lattice& lattice, Eigen::VectorXd values);

  static NodalFunction interpolate(const Lattice& lattice, const std::function<double(const Vec2&)>& u);

  const Lattice& lattice() const { return *lattice_; }
  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

  /// Value at a node located at p; throws RequiresInterpolant for other points.
  double at(const Vec2& p) const;
  double sup_norm() const { return values_.size() ? values_.cwiseAbs().maxCoeff() : 0.0; }

 private:
  const Lattice* lattice_ = nullptr;
  Eigen::VectorXd values_;
};

void require_same_lattice(const Lattice& a, const Lattice& b);

void write_lattice_csv(const Lattice& lattice, const std::string& path);

}  // namespace ellipsol
