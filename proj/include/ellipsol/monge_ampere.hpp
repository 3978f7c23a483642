#pragma once

#include "ellipsol/bellman.hpp"
#include "ellipsol/convexity.hpp"

#include <string>
#include <utility>
#include <vector>

namespace ellipsol {

enum class Quadrature { Centroid, Gauss };

/// det D^2 u = f in the domain, u = g on the boundary, with per-cell target masses.
struct MAProblem {
  const Lattice* lattice = nullptr;
  Eigen::VectorXd mass;  // interior nodes
  ScalarField density;   // empty for pure point masses
  ScalarField boundary;

  static MAProblem with_density(const Lattice& lattice, ScalarField f, ScalarField g,
                                Quadrature q = Quadrature::Centroid);
  static MAProblem with_point_masses(const Lattice& lattice, const std::vector<std::pair<std::size_t, double>>& masses,
                                     ScalarField g);

  /// Pointwise density at an interior node; mass / |cell| when no density is given.
  double density_at(std::size_t node) const;
  /// Nodal function with boundary data filled in and `interior` values inside.
  NodalFunction with_boundary(const Eigen::VectorXd& interior) const;
};

struct MASolveInfo {
  int iterations = 0;
  double residual = 0;  // max_i |r_i| / max(f_i, h^2) for OP; sup |r_i| for BCM
  std::string method;
};

// ---- subdifferential scheme ----

struct OpOptions {
  int window = 2;  // candidate nodes within this many lattice steps; <= 0 uses every node
  double rtol = 1e-8;
  int max_newton = 200;
};

/// Interior: |du(z)| - f_z. Boundary: u - g.
Eigen::VectorXd op_residual(const MAProblem& problem, const NodalFunction& u, int window = 2);
/// Steep paraboloid below the boundary data whose cells all carry at least the target mass.
NodalFunction op_initial_guess(const MAProblem& problem, int window = 2);
NodalFunction op_solve(const MAProblem& problem, const OpOptions& opt = {}, MASolveInfo* info = nullptr);
/// Per-node bisection sweeps in ascending node order, starting from a subsolution.
NodalFunction op_gauss_seidel(const MAProblem& problem, NodalFunction u, const OpOptions& opt = {},
                              int max_sweeps = 100000, MASolveInfo* info = nullptr);

// ---- superbasis scheme ----

double bcm_gamma(double d0, double d1, double d2);

struct BcmOptions {
  int m = 1;
  double tol = 1e-8;  // times 1 + max density
  int max_newton = 200;
};

/// Interior: min over superbases of gamma(positive parts of the scaled second differences) - f(z).
/// Boundary: u - g.
Eigen::VectorXd bcm_residual(const MAProblem& problem, const NodalFunction& u, int m = 1);
NodalFunction bcm_solve(const MAProblem& problem, const BcmOptions& opt = {}, MASolveInfo* info = nullptr);
NodalFunction bcm_gauss_seidel(const MAProblem& problem, NodalFunction u, const BcmOptions& opt = {},
                               int max_sweeps = 100000, MASolveInfo* info = nullptr);

// ---- semi-Lagrangian HJB scheme ----

/// B = R(theta) diag(lambda1, 1 - lambda1) R(theta)^T.
struct FjControl {
  double theta = 0;
  double lambda1 = 0.5;
  Mat2 matrix() const;
};

struct FjControlSet {
  int n_theta = 16;
  int n_lambda = 16;
  std::vector<FjControl> controls;  // I/2 first

  static FjControlSet make(int n_theta = 16, int n_lambda = 16);
};

Eigen::VectorXd fj_residual(const MAProblem& problem, const NodalFunction& u, double k, const FjControlSet& set);
BellmanSystem fj_system(const MAProblem& problem, double k, const FjControlSet& set);
NodalFunction fj_solve(const MAProblem& problem, double k, const FjControlSet& set, MASolveInfo* info = nullptr);

void write_solution_csv(const NodalFunction& u, const std::string& path);
void write_residual_csv(const Lattice& lattice, const Eigen::VectorXd& r, const std::string& path);

}  // namespace ellipsol
