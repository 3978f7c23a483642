#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace ellipsol {

/// Outcome of one randomized oracle: `worst` is the largest normalized discrepancy seen,
/// a trial violates when it exceeds `tol`.
struct OracleResult {
  std::string name;
  int trials = 0;
  int violations = 0;
  double worst = 0;
  double tol = 0;
  double seconds = 0;
  std::string detail;

  bool passed() const { return trials > 0 && violations == 0; }
};

struct VerifyOptions {
  std::uint64_t seed = 1;
  bool flip_gamma_sign = false;  // fault injection for the hexagon oracle
};

OracleResult verify_quadratic_exactness(const VerifyOptions& opt, int trials = 200);
OracleResult verify_fd_consistency(const VerifyOptions& opt, int trials = 200);
OracleResult verify_howard(const VerifyOptions& opt, int trials = 100);
OracleResult verify_isaacs(const VerifyOptions& opt, int trials = 100);
OracleResult verify_richardson(const VerifyOptions& opt, int trials = 50);
OracleResult verify_hexagon(const VerifyOptions& opt, int trials = 1000);
OracleResult verify_monotone_iff_nonnegative(const VerifyOptions& opt, int trials = 500);
OracleResult verify_comparison(const VerifyOptions& opt, int trials = 200);
OracleResult verify_brunn_minkowski(const VerifyOptions& opt, int trials = 500);
OracleResult verify_op_maximum_principle(const VerifyOptions& opt, int trials = 200);

/// Every oracle above with its default trial count.
std::vector<OracleResult> run_verification(const VerifyOptions& opt);

/// Fixed-width table, one row per oracle.
void print_summary(const std::vector<OracleResult>& results, std::ostream& out, bool with_seconds = true);

}  // namespace ellipsol
