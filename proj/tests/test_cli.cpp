#include "doctest.h"
#include "ellipsol/config.hpp"

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ellipsol;

namespace {

namespace fs = std::filesystem;

struct Run {
  int code = -1;
  std::string out;
};

// Runs the CLI with stderr folded into the captured output.
Run run(const std::string& args) {
  const std::string cmd = std::string(ELLIPSOL_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p);
  char buf[4096];
  while (std::fgets(buf, sizeof buf, p)) r.out += buf;
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ellipsol_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string write(const fs::path& dir, const std::string& text) {
  const auto path = dir / "run.cfg";
  std::ofstream(path) << text;
  return path.string();
}

int config_error_line(const std::string& text) {
  try {
    parse_config(text, "cfg");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConfigError);
    const std::string w = e.what();
    const auto p = w.find("cfg:");
    if (p == std::string::npos) return 0;
    return std::atoi(w.c_str() + p + 4);
  }
  return -1;
}

// Summary table with the seconds column removed.
std::string without_seconds(const std::string& out) {
  std::istringstream in(out);
  std::string line, res;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<std::string> cols;
    for (std::string c; ls >> c;) cols.push_back(c);
    if (cols.size() > 5) cols.erase(cols.begin() + 5);
    for (const auto& c : cols) res += c + " ";
    res += "\n";
  }
  return res;
}

}  // namespace

TEST_CASE("graded polynomials") {
  CHECK(eval_poly({}, Vec2(1, 2)) == 0);
  CHECK(eval_poly({3}, Vec2(1, 2)) == 3);
  // 1 + 2x + 3y + 4x^2 + 5xy + 6y^2 + 7x^3 at (2, -1)
  CHECK(eval_poly({1, 2, 3, 4, 5, 6, 7}, Vec2(2, -1)) == doctest::Approx(1 + 4 - 3 + 16 - 10 + 6 + 56));
}

TEST_CASE("config parsing") {
  const auto cfg = parse_config(R"(# comment
scheme = bcm
case = smooth-ma   # trailing comment
h_list = 0.25, 0.125
tol = 1e-9

[bcm]
m = 2
[domain]
lo = -0.5, -1
hi = 1, 1
[convergence]
rate_lo = 0.5
)");
  CHECK(cfg.scheme == Scheme::Bcm);
  CHECK(cfg.case_name == "smooth-ma");
  CHECK(cfg.h_list == std::vector<double>{0.25, 0.125});
  CHECK(cfg.tol == 1e-9);
  CHECK(cfg.bcm_m == 2);
  CHECK(cfg.study_options().bcm_m == 2);
  REQUIRE(cfg.lo);
  CHECK(cfg.lo->x() == -0.5);
  const auto c = build_case(cfg);
  CHECK(c.lo.x() == -0.5);
  CHECK(c.rate_lo == 0.5);
  CHECK(c.rate_hi == 1.3);
}

TEST_CASE("config errors name the line") {
  CHECK(config_error_line("scheme = op\ncase = smooth-ma\nbogus = 1\n") == 3);
  CHECK(config_error_line("scheme = op\n[op]\nwindw = 2\n") == 3);
  CHECK(config_error_line("scheme = op\nscheme = bcm\n") == 2);
  CHECK(config_error_line("scheme = newton\n") == 1);
  CHECK(config_error_line("scheme = op\ncase = smooth-ma\nh = -1\n") == 3);
  CHECK(config_error_line("scheme = op\ncase smooth-ma\n") == 2);
  CHECK(config_error_line("scheme = op\n[problem\n") == 2);
  CHECK(config_error_line("scheme = op\n[problem]\ng = poly: 1, x\n") == 3);
  CHECK(config_error_line("scheme = op\n[problem]\ncontrols = 1, 2, 1\ng = poly: 0\n") == 3);
  CHECK(config_error_line("case = smooth-ma\n") == 0);
  CHECK(config_error_line("scheme = op\n") == 0);
}

TEST_CASE("inline problems") {
  auto cfg = parse_config("scheme = hjb-howard\n[problem]\ncontrols = 1, 0, 1; 2, 0, 1\nf = poly: 1\ng = poly: 0\n");
  auto c = build_case(cfg);
  CHECK(c.controls.size() == 2);
  CHECK(c.control_source(1, Vec2(0.3, 0.2)) == 1);
  CHECK(c.supports(Scheme::HjbHoward));
  cfg.scheme = Scheme::Op;
  CHECK_THROWS_AS(build_case(cfg), Error);

  auto pm = build_case(parse_config("scheme = op\n[problem]\ng = poly: 0\npoint_masses = 0, 0, 1; 0.5, 0, 2\n"));
  CHECK(pm.point_masses.size() == 2);
  CHECK_FALSE(pm.density);
  auto from_case = build_case(parse_config("scheme = op\n[problem]\nu = smooth-ma\nf = smooth-ma\n"));
  CHECK(from_case.boundary(Vec2(1, 0)) == doctest::Approx(std::exp(0.5)));
  CHECK(from_case.density(Vec2(0, 0)) == doctest::Approx(1));
}

TEST_CASE("solve writes artifacts for a linear Poisson problem") {
  const auto dir = scratch("poisson");
  const auto cfg = write(dir, "scheme = linear\nh = 0.125\noutput = " + (dir / "out").string() +
                                  "\n[problem]\ncontrols = 1, 0, 1\nf = poly: 4\nu = poly: 0, 0, 0, 1, 0, 1\n");
  const auto r = run("solve --config " + cfg);
  INFO(r.out);
  REQUIRE(r.code == 0);
  for (const char* f : {"solution.csv", "residual.csv", "trace.csv"}) CHECK(fs::exists(dir / "out" / f));
  std::ifstream in(dir / "out" / "residual.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "node_id,x,y,residual");
  double worst = 0;
  while (std::getline(in, line)) worst = std::max(worst, std::abs(std::stod(line.substr(line.rfind(',') + 1))));
  CHECK(worst <= 1e-11);
}

TEST_CASE("malformed config exits 3 with the line") {
  const auto dir = scratch("bad");
  const auto cfg = write(dir, "scheme = op\ncase = smooth-ma\nh = 0.25\nbogus = 1\n");
  const auto r = run("solve --config " + cfg);
  CHECK(r.code == 3);
  CHECK(r.out.find("run.cfg:4") != std::string::npos);
}

TEST_CASE("point mass solve") {
  const auto dir = scratch("pm");
  const auto cfg = write(dir, "scheme = op\nh = 0.25\n[problem]\ng = poly: -1, 0, 0, 1, 0, 1\npoint_masses = 0, 0, 3\n");
  const auto r = run("solve --config " + cfg + " --out " + (dir / "o").string());
  INFO(r.out);
  CHECK(r.code == 0);
  CHECK(fs::exists(dir / "o" / "solution.csv"));
}

TEST_CASE("solver failure exits 2") {
  const auto dir = scratch("fail");
  // boundary data with no convex extension
  const auto cfg = write(dir, "scheme = op\nh = 0.25\n[problem]\ng = poly: 0, 0, 0, -1, 0, -1\nf = poly: 1\n");
  CHECK(run("solve --config " + cfg + " --out " + dir.string()).code == 2);
}

TEST_CASE("convergence exit codes") {
  const auto dir = scratch("conv");
  auto cfg = write(dir, "scheme = hjb-howard\ncase = hjb-smooth\nh_list = 0.125, 0.0625, 0.03125\n");
  auto r = run("convergence --config " + cfg + " --out " + dir.string());
  INFO(r.out);
  CHECK(r.code == 0);
  CHECK(fs::exists(dir / "report.csv"));

  cfg = write(dir, "scheme = linear\ncase = poisson\nh_list = 0.125, 0.0625\n[convergence]\nrate_hi = 1.1\n");
  CHECK(run("convergence --config " + cfg + " --out " + dir.string()).code == 4);

  cfg = write(dir, "scheme = op\ncase = smooth-ma\nh_list = 0.125\n");
  CHECK(run("convergence --config " + cfg + " --out " + dir.string()).code == 3);
}

TEST_CASE("verify is deterministic and catches an injected fault") {
  const auto a = run("verify --seed 7");
  const auto b = run("verify --seed 7");
  INFO(a.out);
  CHECK(a.code == 0);
  CHECK(b.code == 0);
  CHECK(without_seconds(a.out) == without_seconds(b.out));

  const auto f = run("verify --seed 7 --inject-fault gamma-sign");
  CHECK(f.code == 5);
  CHECK(f.out.find("FAILED: hexagon-gamma") != std::string::npos);
}
