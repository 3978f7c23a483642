#pragma once

#include "ellipsol/lattice.hpp"

#include <Eigen/Sparse>

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace ellipsol {

using ScalarField = std::function<double(const Vec2&)>;
using MatrixField = std::function<Mat2(const Vec2&)>;

/// Nonnegative-weight rank-one decomposition sum_y a_y y y^T = A (directions in
/// lattice coordinates, one representative per +-pair).
struct SpdDecomposition {
  std::vector<IVec2> directions;
  std::vector<double> weights;
  int m = 0;
  double lambda0 = 0;
  double residual = 0;  // Frobenius norm of the reconstruction error
};

/// Lawson-Hanson nonnegative least squares: argmin_{x >= 0} |Ax - b|.
Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, int max_iter = 0);

/// Decomposition of A in canonical coordinates.
SpdDecomposition decompose_spd(const Mat2& A, int m_max);
/// Decomposition of A for the given lattice basis: sum a_y (By)(By)^T = A.
SpdDecomposition decompose_spd(const Mat2& A, int m_max, const Mat2& basis);

Mat2 reconstruct(const SpdDecomposition& d);

/// Representative of {y, -y}: first nonzero coordinate positive.
IVec2 sign_normalize(IVec2 y);

/// Two-sided second difference along the physical direction v with nominal step k,
/// shortened at the boundary of `domain`.
double second_difference(const Domain& domain, const ScalarField& u, const Vec2& z, const Vec2& v, double k);

/// Same on a nodal function, at interior node z along lattice direction y. Exit
/// points that are not nodes are read from `boundary` when given.
double second_difference(const NodalFunction& u, std::size_t z, const IVec2& y, double k,
                         const ScalarField* boundary = nullptr);

/// Sparse row over nodes plus a constant term.
struct LinearRow {
  std::vector<std::pair<std::size_t, double>> coeffs;
  double constant = 0;
};

/// Add coeff * u(p) to `row`. Nodes contribute directly; other boundary points use
/// `boundary`; other points use bilinear interpolation when `interpolate` is set
/// and otherwise raise RequiresInterpolant.
void add_point_value(const Lattice& lattice, const Vec2& p, double coeff, const ScalarField& boundary,
                     bool interpolate, LinearRow& row);

/// Row of sum_j w_j * delta^2 along physical direction v_j with nominal step k at node z.
void add_second_difference(const Lattice& lattice, std::size_t z, const Vec2& v, double k, double weight,
                           const ScalarField& boundary, bool interpolate, LinearRow& row);

struct StencilTerm {
  IVec2 y;
  double weight;
};

/// L_h u(z) = sum_y a_y(z) delta^2_{y,h} u(z) on interior nodes, with Dirichlet data g.
class PositiveLinearOperator {
 public:
  PositiveLinearOperator(const Lattice& lattice, std::vector<std::vector<StencilTerm>> terms,
                         Eigen::VectorXd f, ScalarField g);

  const Lattice& lattice() const { return *lattice_; }
  const std::vector<StencilTerm>& terms(std::size_t node) const { return terms_[node]; }
  const std::vector<std::vector<StencilTerm>>& all_terms() const { return terms_; }
  const Eigen::VectorXd& source() const { return f_; }
  const ScalarField& boundary() const { return g_; }
  Eigen::VectorXd boundary_values() const;

  /// Rows over all nodes (n_interior x n_nodes) and the off-node constant.
  const Eigen::SparseMatrix<double, Eigen::RowMajor>& matrix() const { return full_; }
  const Eigen::VectorXd& offnode_constant() const { return offnode_; }
  /// Interior block and the full constant b once boundary nodes carry g.
  Eigen::SparseMatrix<double, Eigen::RowMajor> interior_matrix() const;
  Eigen::VectorXd boundary_constant() const;

 private:
  const Lattice* lattice_;
  std::vector<std::vector<StencilTerm>> terms_;
  Eigen::VectorXd f_;
  ScalarField g_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> full_;
  Eigen::VectorXd offnode_;
};

PositiveLinearOperator assemble_linear(const Lattice& lattice, const MatrixField& A, const ScalarField& f,
                                       const ScalarField& g, int m_max);

/// Interior rows: L_h u - f. Boundary rows: u - g.
NodalFunction apply(const PositiveLinearOperator& op, const NodalFunction& u);

NodalFunction solve_monotone_linear(const PositiveLinearOperator& op);

struct PositivityReport {
  bool ok = true;
  double worst_weight = 0;
  std::size_t worst_weight_node = 0;
  double min_lambda0 = 0;
  std::size_t min_lambda0_node = 0;
};

/// Orthogonal-pair bound of a weight table (0 when no orthogonal pair carries weight).
double orthogonal_pair_bound(const std::vector<StencilTerm>& terms);

PositivityReport check_positive_type(const PositiveLinearOperator& op);

void write_operator_csv(const PositiveLinearOperator& op, const std::string& path);

}  // namespace ellipsol
