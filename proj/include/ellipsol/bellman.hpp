#pragma once

#include "ellipsol/error.hpp"
#include "ellipsol/fd.hpp"

#include <Eigen/Sparse>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ellipsol {

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// inf over beta, sup over alpha of f^{alpha,beta} - A^{alpha,beta} : D^2 u,
/// with Dirichlet data g. A singleton beta set is an HJB problem.
struct ControlProblem {
  const Lattice* lattice = nullptr;
  int num_alpha = 1;
  int num_beta = 1;
  std::function<Mat2(int alpha, int beta, const Vec2& x)> coefficient;
  std::function<double(int alpha, int beta, const Vec2& x)> source;
  ScalarField boundary;
  int m_max = 2;
};

/// Algebraic system F(x) = min_beta max_alpha (K^{alpha,beta} x - f^{alpha,beta}), in solver
/// orientation: every K is an M-matrix.
class BellmanSystem {
 public:
  BellmanSystem(int num_alpha, int num_beta, std::vector<SparseRows> K, std::vector<Eigen::VectorXd> f);

  int num_alpha() const { return num_alpha_; }
  int num_beta() const { return num_beta_; }
  Eigen::Index size() const { return K_.front().rows(); }
  const SparseRows& K(int a, int b) const { return K_[std::size_t(a + num_alpha_ * b)]; }
  const Eigen::VectorXd& f(int a, int b) const { return f_[std::size_t(a + num_alpha_ * b)]; }
  double max_diagonal() const;
  /// 1 + largest |f| entry; residual tolerances are relative to it.
  double scale() const;

  const Lattice* lattice = nullptr;
  ScalarField boundary;

 private:
  int num_alpha_;
  int num_beta_;
  std::vector<SparseRows> K_;
  std::vector<Eigen::VectorXd> f_;
};

BellmanSystem assemble_bellman(const ControlProblem& problem);

struct Policy {
  std::vector<int> alpha;
  std::vector<int> beta;
  friend bool operator==(const Policy&, const Policy&) = default;
};

/// Componentwise min over beta of max over alpha; ties go to the lowest index.
/// With `fixed_beta`, row i only uses beta = fixed_beta[i].
Eigen::VectorXd bellman_residual(const BellmanSystem& sys, const Eigen::VectorXd& x, Policy* policy = nullptr,
                                 const std::vector<int>* fixed_beta = nullptr);
Policy select_policy(const BellmanSystem& sys, const Eigen::VectorXd& x);

/// Solution of the linear system picked row by row from (alpha_i, beta_i).
Eigen::VectorXd solve_policy(const BellmanSystem& sys, const Policy& policy);

struct TraceRow {
  int iter = 0;
  double residual = 0;
  int policy_changes = 0;
  double x_min = 0;
  double x_max = 0;
  friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

struct SolveResult {
  Eigen::VectorXd x;
  Policy policy;
  std::vector<TraceRow> trace;
  std::vector<TraceRow> outer_trace;  // two-level only
  int iterations = 0;
  double residual = 0;
  double monotonicity_violation = 0;  // max_i (x_{k+1} - x_k)_i over policy-iteration steps
  // Two-level only: max_i (x_k - x_{k+1})_i over outer steps. Picking the minimizing beta
  // pushes K-monotone iterates up, so outer iterates are nondecreasing.
  double outer_monotonicity_violation = 0;
  double contraction = 0;             // Richardson only
};

class ConvergenceFailure : public Error {
 public:
  ConvergenceFailure(ErrorKind kind, const std::string& what, std::vector<TraceRow> trace)
      : Error(kind, what), trace(std::move(trace)) {}
  std::vector<TraceRow> trace;
};

struct SolverOptions {
  double tol = 1e-10;  // relative to BellmanSystem::scale()
  int max_iter = 0;    // 0: default cap
};

SolveResult howard_solve(const BellmanSystem& sys, std::optional<Eigen::VectorXd> x_init = std::nullopt,
                         const SolverOptions& opt = {}, const std::vector<int>* fixed_beta = nullptr);
SolveResult two_level_howard(const BellmanSystem& sys, std::optional<Eigen::VectorXd> x_init = std::nullopt,
                             const SolverOptions& opt = {});
/// x <- x - F(x) / Lambda_N; Lambda_N <= 0 selects 1.01 * max diagonal.
SolveResult richardson_solve(const BellmanSystem& sys, std::optional<Eigen::VectorXd> x_init = std::nullopt,
                             double Lambda_N = 0, const SolverOptions& opt = {1e-8, 1000000});

/// Interior unknowns plus boundary data as a nodal function.
NodalFunction to_nodal(const Lattice& lattice, const Eigen::VectorXd& x, const ScalarField& g);

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path);

}  // namespace ellipsol
