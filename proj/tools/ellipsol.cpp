#include "CLI11.hpp"
#include "ellipsol/config.hpp"
#include "ellipsol/csv.hpp"
#include "ellipsol/log.hpp"
#include "ellipsol/parallel.hpp"
#include "ellipsol/verify.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>

using namespace ellipsol;

namespace {

enum Exit { kOk = 0, kFailure = 1, kNoConvergence = 2, kConfig = 3, kRateOutside = 4, kVerify = 5 };

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::NoConvergence:
    case ErrorKind::Diverging:
    case ErrorKind::NoConvexSubsolution:
    case ErrorKind::SingularSystem:
    case ErrorKind::StencilExhausted: return kNoConvergence;
    case ErrorKind::ConfigError:
    case ErrorKind::InvalidArgument:
    case ErrorKind::EmptyControlSet:
    case ErrorKind::NoInteriorNodes: return kConfig;
    default: return kFailure;
  }
}

struct Common {
  std::string config;
  std::string out;
  int threads = 0;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config) {
  auto* opt = cmd->add_option("--config", c.config, "experiment config file");
  if (needs_config) opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "output directory (overrides the config)");
  cmd->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", c.seed, "random seed");
  cmd->add_option("--tol", c.tol, "solver tolerance (overrides the config)")->check(CLI::PositiveNumber);
}

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = load_config(c.config);
  if (!c.out.empty()) cfg.output = c.out;
  if (c.threads > 0) cfg.threads = c.threads;
  if (c.seed) cfg.seed = *c.seed;
  if (c.tol) cfg.tol = *c.tol;
  set_num_threads(cfg.threads);
  std::filesystem::create_directories(cfg.output);
  return cfg;
}

std::string join(const std::string& dir, const char* name) { return (std::filesystem::path(dir) / name).string(); }

int cmd_solve(const Common& common) {
  const ExperimentConfig cfg = load(common);
  const ManufacturedCase c = build_case(cfg);
  if (!cfg.h) throw Error(ErrorKind::ConfigError, common.config + ": solve needs 'h'");
  log_info("solving " + c.name + " with " + std::string(to_string(cfg.scheme)) + " at h = " + format_double(*cfg.h));
  CaseSolution s;
  try {
    s = solve_case(c, cfg.scheme, *cfg.h, cfg.study_options());
  } catch (const ConvergenceFailure& e) {
    write_trace_csv(e.trace, join(cfg.output, "trace.csv"));
    throw;
  }
  write_solution_csv(s.u, join(cfg.output, "solution.csv"));
  write_residual_csv(*s.lattice, s.residual, join(cfg.output, "residual.csv"));
  if (s.trace.empty())
    s.trace.push_back({s.iterations, s.residual_norm, 0, s.u.values().minCoeff(), s.u.values().maxCoeff()});
  write_trace_csv(s.trace, join(cfg.output, "trace.csv"));

  std::printf("case %s scheme %s nodes %zu interior %zu\n", c.name.c_str(), std::string(to_string(cfg.scheme)).c_str(),
              s.lattice->num_nodes(), s.lattice->num_interior());
  std::printf("method %s iterations %d residual %s\n", s.method.c_str(), s.iterations,
              format_double(s.residual_norm).c_str());
  if (c.exact) {
    double err = 0;
    for (std::size_t i = 0; i < s.lattice->num_nodes(); ++i)
      err = std::max(err, std::abs(s.u[i] - c.exact(s.lattice->point(i))));
    std::printf("sup error %s\n", format_double(err).c_str());
  }
  return kOk;
}

int cmd_convergence(const Common& common) {
  const ExperimentConfig cfg = load(common);
  const ManufacturedCase c = build_case(cfg);
  if (cfg.h_list.size() < 2)
    throw Error(ErrorKind::ConfigError, common.config + ": a convergence study needs at least two levels in 'h_list'");
  if (!c.exact) throw Error(ErrorKind::ConfigError, common.config + ": a convergence study needs 'problem.u'");
  const ConvergenceReport r = run_convergence(c, cfg.scheme, cfg.h_list, cfg.study_options());
  write_report_csv({r}, join(cfg.output, "report.csv"));

  std::printf("%-12s %-12s %-10s\n", "h", "sup_error", "seconds");
  for (std::size_t i = 0; i < r.h.size(); ++i)
    std::printf("%-12s %-12.4e %-10.2f\n", format_double(r.h[i]).c_str(), r.errors[i], r.seconds[i]);
  std::printf("rate %.4f (last two %.4f), window [%g, %g]\n", r.rate, r.rate_last_two, r.rate_lo, r.rate_hi);
  if (r.failure) {
    std::fprintf(stderr, "level %zu failed: %s\n", r.h.size(), r.failure->c_str());
    return exit_code(*r.failure_kind);
  }
  if (!r.in_window()) {
    std::printf("rate outside window\n");
    return kRateOutside;
  }
  return kOk;
}

int cmd_verify(const Common& common, const std::string& fault) {
  VerifyOptions opt;
  if (common.config.size()) opt.seed = load(common).seed;
  if (common.seed) opt.seed = *common.seed;
  if (common.threads > 0) set_num_threads(common.threads);
  if (fault == "gamma-sign") opt.flip_gamma_sign = true;
  else if (!fault.empty()) throw Error(ErrorKind::ConfigError, "unknown fault '" + fault + "'");
  const auto results = run_verification(opt);
  print_summary(results, std::cout);
  bool ok = true;
  for (const auto& r : results)
    if (!r.passed()) {
      std::printf("FAILED: %s\n", r.name.c_str());
      ok = false;
    }
  return ok ? kOk : kVerify;
}

}  // namespace

int main(int argc, char** argv) {
  if (!init_logging()) std::fprintf(stderr, "ELLIPSOL_LOG must be error, info or debug; using info\n");
  CLI::App app{"Monotone lattice schemes for fully nonlinear elliptic equations"};
  app.require_subcommand(1);
  Common common;
  std::string fault;
  auto* solve = app.add_subcommand("solve", "solve one configured problem and write CSV artifacts");
  add_common(solve, common, true);
  auto* conv = app.add_subcommand("convergence", "run a refinement study and write report.csv");
  add_common(conv, common, true);
  auto* verify = app.add_subcommand("verify", "run the randomized invariant suites");
  add_common(verify, common, false);
  verify->add_option("--inject-fault", fault)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*solve) return cmd_solve(common);
    if (*conv) return cmd_convergence(common);
    return cmd_verify(common, fault);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
}
