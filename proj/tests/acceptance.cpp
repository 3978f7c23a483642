// Runs the ten acceptance criteria and prints one PASS/FAIL line for each.
#include "ellipsol/harness.hpp"
#include "ellipsol/verify.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>

using namespace ellipsol;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* title, double budget_seconds, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("threw ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs < budget_seconds;
  const bool pass = o.ok && in_time;
  failures += !pass;
  std::printf("criterion %2d %s  %s: %s [%.1f s of %.0f s%s]\n", id, pass ? "PASS" : "FAIL", title, o.detail.c_str(),
              secs, budget_seconds, in_time ? "" : ", over budget");
  std::fflush(stdout);
}

Outcome from_oracle(const OracleResult& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d trials, %d violations, worst %.3e (tol %.1e)%s%s", r.trials, r.violations,
                r.worst, r.tol, r.detail.empty() ? "" : ", ", r.detail.c_str());
  return {r.passed(), buf};
}

std::vector<double> dyadic(int from, int to) {
  std::vector<double> h;
  for (int l = from; l <= to; ++l) h.push_back(std::ldexp(1.0, -l));
  return h;
}

std::string describe(const ConvergenceReport& r) {
  std::string s = std::string(to_string(r.scheme)) + " errors";
  char buf[64];
  for (double e : r.errors) {
    std::snprintf(buf, sizeof buf, " %.3e", e);
    s += buf;
  }
  std::snprintf(buf, sizeof buf, " rate %.3f", r.rate);
  s += buf;
  if (r.failure) s += " (failed: " + *r.failure + ")";
  return s;
}

}  // namespace

int main() {
  const VerifyOptions opt;

  criterion(1, "quadratic exactness of subdifferential measures", 30,
            [&] { return from_oracle(verify_quadratic_exactness(opt, 200)); });

  criterion(2, "finite-difference consistency on quadratics", 10,
            [&] { return from_oracle(verify_fd_consistency(opt, 200)); });

  criterion(3, "smooth Monge-Ampere rates in [0.7, 1.3]", 300, [] {
    const auto c = builtin_case("smooth-ma");
    const auto op = run_convergence(c, Scheme::Op, dyadic(3, 6));
    const auto bcm = run_convergence(c, Scheme::Bcm, dyadic(3, 6));
    return Outcome{op.in_window() && bcm.in_window(), describe(op) + "; " + describe(bcm)};
  });

  criterion(4, "C^{1,1} Monge-Ampere rate in [0.4, 1.1]", 300, [] {
    // the [-2, 2] box at h = 2^-2 .. 2^-5 has the node counts of the unit-width study above
    const auto r = run_convergence(builtin_case("c11-ma"), Scheme::Op, dyadic(2, 5));
    return Outcome{r.in_window(), describe(r)};
  });

  criterion(5, "policy iteration on 100 HJB instances", 60, [&] { return from_oracle(verify_howard(opt, 100)); });

  criterion(6, "two-level policy iteration on 100 Isaacs instances", 60,
            [&] { return from_oracle(verify_isaacs(opt, 100)); });

  criterion(7, "Richardson agrees with policy iteration", 120,
            [&] { return from_oracle(verify_richardson(opt, 50)); });

  criterion(8, "gamma equals the hexagon subdifferential area", 30,
            [&] { return from_oracle(verify_hexagon(opt, 1000)); });

  criterion(9, "structural property corpus", 120, [&] {
    const OracleResult parts[] = {verify_monotone_iff_nonnegative(opt, 500), verify_comparison(opt, 200),
                                  verify_brunn_minkowski(opt, 500), verify_op_maximum_principle(opt, 200)};
    Outcome o{true, ""};
    for (const auto& p : parts) {
      o.ok &= p.passed();
      if (!o.detail.empty()) o.detail += "; ";
      o.detail += p.name + " " + std::to_string(p.violations) + "/" + std::to_string(p.trials);
    }
    return o;
  });

  criterion(10, "smooth HJB rate at most 2.3", 120, [] {
    const auto r = run_convergence(builtin_case("hjb-smooth"), Scheme::HjbHoward, dyadic(3, 6));
    return Outcome{!r.failure && r.rate <= 2.3, describe(r)};
  });

  std::printf("%d of 10 criteria failed\n", failures);
  return failures ? 1 : 0;
}
