#pragma once

#include "ellipsol/harness.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ellipsol {

/// A scalar field given either as a built-in case name (its exact solution or density)
/// or as `poly: c0, c1, ...` in graded order 1, x, y, x^2, xy, y^2, x^3, ...
struct FieldSpec {
  std::string case_name;  // empty for a polynomial
  std::vector<double> poly;
};

/// Evaluates the graded polynomial with the given coefficients.
double eval_poly(const std::vector<double>& coeffs, const Vec2& x);

/// Experiment description read from `key = value` lines. `[section]` headers prefix the
/// keys that follow with `section.`; `#` starts a comment. See README for the schema.
struct ExperimentConfig {
  Scheme scheme = Scheme::Op;
  std::optional<std::string> case_name;
  std::optional<double> h;
  std::vector<double> h_list;
  double tol = 0;
  std::uint64_t seed = 1;
  std::string output = ".";
  int threads = 1;

  std::optional<Vec2> lo, hi;
  std::optional<FieldSpec> f, g, u;  // f is the density, or the shared source when controls are given
  std::vector<std::pair<Vec2, double>> point_masses;
  std::vector<Mat2> controls;
  std::optional<int> op_window;
  int bcm_m = 1;
  int fj_n_theta = 16;
  int fj_n_lambda = 16;
  Quadrature quadrature = Quadrature::Centroid;
  std::optional<double> rate_lo, rate_hi;

  StudyOptions study_options() const;
};

/// Throws Error(ConfigError) with "origin:line: message" on the first problem.
ExperimentConfig parse_config(std::string_view text, std::string_view origin = "config");
ExperimentConfig load_config(const std::string& path);

/// Built-in case with the config's overrides applied, or a case assembled from the inline keys.
ManufacturedCase build_case(const ExperimentConfig& cfg);

}  // namespace ellipsol
