#pragma once

#include "ellipsol/bellman.hpp"
#include "ellipsol/monge_ampere.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ellipsol {

enum class Regularity { Smooth, C11, Alexandrov, HjbSmooth };
enum class Scheme { Op, Bcm, Fj, HjbHoward, Isaacs2lh, Richardson, Linear };

std::string_view to_string(Regularity r);
std::string_view to_string(Scheme s);
/// Accepts op, bcm, fj, hjb-howard, isaacs-2lh, richardson, linear.
std::optional<Scheme> parse_scheme(std::string_view name);

/// A problem with a known solution on a box.
struct ManufacturedCase {
  std::string name;
  Regularity regularity = Regularity::Smooth;
  Vec2 lo{-1, -1};
  Vec2 hi{1, 1};
  ScalarField exact;
  ScalarField density;                               // Monge-Ampere cases with a density
  std::vector<std::pair<Vec2, double>> point_masses;  // placed at the nearest interior node
  ScalarField boundary;
  // Control cases: sup over alpha of source(alpha, x) - A_alpha : D^2 u = 0. Linear cases use one control.
  std::vector<Mat2> controls;
  std::function<double(int, const Vec2&)> control_source;
  double rate_lo = 0;
  double rate_hi = 0;
  int op_window = 2;

  Domain domain() const { return Domain::box(lo, hi); }
  bool is_monge_ampere() const { return regularity != Regularity::HjbSmooth && controls.empty(); }
  bool supports(Scheme s) const;
};

/// smooth-ma, c11-ma, point-mass, hjb-smooth, poisson.
std::vector<std::string> case_names();
/// Throws InvalidArgument for an unknown name.
ManufacturedCase builtin_case(std::string_view name);

struct StudyOptions {
  double tol = 0;  // 0 keeps each solver's default
  int bcm_m = 1;
  int fj_n_theta = 16;
  int fj_n_lambda = 16;
  Quadrature quadrature = Quadrature::Centroid;
};

struct CaseSolution {
  std::unique_ptr<Lattice> lattice;
  NodalFunction u;
  Eigen::VectorXd residual;  // one entry per node
  std::vector<TraceRow> trace;
  int iterations = 0;
  double residual_norm = 0;
  std::string method;
};

CaseSolution solve_case(const ManufacturedCase& c, Scheme scheme, double h, const StudyOptions& opt = {});

struct ConvergenceReport {
  std::string case_name;
  Scheme scheme = Scheme::Op;
  std::vector<double> h;
  std::vector<double> errors;  // sup over nodes of |u_h - u|
  std::vector<double> seconds;
  std::vector<int> iterations;
  double rate = 0;           // all levels
  double rate_last_two = 0;  // finest two levels
  double rate_lo = 0;
  double rate_hi = 0;
  std::optional<std::string> failure;  // set when a level threw; earlier levels are kept
  std::optional<ErrorKind> failure_kind;

  bool in_window() const { return !failure && rate >= rate_lo && rate <= rate_hi; }
};

/// Least-squares slope of log e against log h; NaN when fewer than two levels or an error is not positive.
double fit_rate(const std::vector<double>& h, const std::vector<double>& errors);

/// h_list must hold at least two levels, each half the previous one.
ConvergenceReport run_convergence(const ManufacturedCase& c, Scheme scheme, const std::vector<double>& h_list,
                                  const StudyOptions& opt = {});

/// Columns case, scheme, h, sup_error, rate_cum, seconds. rate_cum fits levels up to the row.
void write_report_csv(const std::vector<ConvergenceReport>& reports, const std::string& path);

/// Interpolant of a random positive definite quadratic plus a few random cones.
NodalFunction generate_convex_nodal(std::uint64_t seed, const Lattice& lattice);

}  // namespace ellipsol
