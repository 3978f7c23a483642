#include "ellipsol/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace ellipsol {

double eval_poly(const std::vector<double>& c, const Vec2& x) {
  double s = 0;
  std::size_t k = 0;
  for (int deg = 0; k < c.size(); ++deg)
    for (int j = 0; j <= deg && k < c.size(); ++j, ++k)
      s += c[k] * std::pow(x.x(), deg - j) * std::pow(x.y(), j);
  return s;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  for (;;) {
    const auto p = s.find(sep);
    out.push_back(trim(s.substr(0, p)));
    if (p == std::string_view::npos) return out;
    s.remove_prefix(p + 1);
  }
}

// Thrown by value parsers; rethrown with the line number attached.
struct BadValue {
  std::string message;
};

double to_double(std::string_view s) {
  s = trim(s);
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size()) throw BadValue{"expected a number, got '" + std::string(s) + "'"};
  return v;
}

long long to_int(std::string_view s) {
  s = trim(s);
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size()) throw BadValue{"expected an integer, got '" + std::string(s) + "'"};
  return v;
}

std::vector<double> to_doubles(std::string_view s, char sep) {
  std::vector<double> out;
  for (auto part : split(s, sep)) out.push_back(to_double(part));
  return out;
}

Vec2 to_vec2(std::string_view s) {
  const auto v = to_doubles(s, ',');
  if (v.size() != 2) throw BadValue{"expected two comma-separated numbers"};
  return {v[0], v[1]};
}

FieldSpec to_field(std::string_view s) {
  s = trim(s);
  FieldSpec f;
  if (s.substr(0, 5) == "poly:") {
    f.poly = to_doubles(s.substr(5), ',');
    return f;
  }
  bool known = false;
  for (const auto& n : case_names()) known |= n == s;
  if (!known) throw BadValue{"expected 'poly: c0, c1, ...' or a built-in case name, got '" + std::string(s) + "'"};
  f.case_name = std::string(s);
  return f;
}

using Handler = std::function<void(ExperimentConfig&, std::string_view)>;

const std::map<std::string, Handler, std::less<>>& handlers() {
  static const std::map<std::string, Handler, std::less<>> table = {
      {"scheme",
       [](ExperimentConfig& c, std::string_view v) {
         const auto s = parse_scheme(trim(v));
         if (!s) throw BadValue{"unknown scheme '" + std::string(trim(v)) + "'"};
         c.scheme = *s;
       }},
      {"case",
       [](ExperimentConfig& c, std::string_view v) {
         const std::string name(trim(v));
         bool known = false;
         for (const auto& n : case_names()) known |= n == name;
         if (!known) throw BadValue{"unknown case '" + name + "'"};
         c.case_name = name;
       }},
      {"h",
       [](ExperimentConfig& c, std::string_view v) {
         c.h = to_double(v);
         if (!(*c.h > 0)) throw BadValue{"h must be positive"};
       }},
      {"h_list",
       [](ExperimentConfig& c, std::string_view v) {
         c.h_list = to_doubles(v, ',');
         for (double h : c.h_list)
           if (!(h > 0)) throw BadValue{"mesh sizes must be positive"};
       }},
      {"tol",
       [](ExperimentConfig& c, std::string_view v) {
         c.tol = to_double(v);
         if (!(c.tol > 0)) throw BadValue{"tol must be positive"};
       }},
      {"seed",
       [](ExperimentConfig& c, std::string_view v) {
         const auto s = to_int(v);
         if (s < 0) throw BadValue{"seed must be nonnegative"};
         c.seed = std::uint64_t(s);
       }},
      {"output", [](ExperimentConfig& c, std::string_view v) { c.output = std::string(trim(v)); }},
      {"threads",
       [](ExperimentConfig& c, std::string_view v) {
         c.threads = int(to_int(v));
         if (c.threads < 1) throw BadValue{"threads must be at least 1"};
       }},
      {"domain.lo", [](ExperimentConfig& c, std::string_view v) { c.lo = to_vec2(v); }},
      {"domain.hi", [](ExperimentConfig& c, std::string_view v) { c.hi = to_vec2(v); }},
      {"problem.f", [](ExperimentConfig& c, std::string_view v) { c.f = to_field(v); }},
      {"problem.g", [](ExperimentConfig& c, std::string_view v) { c.g = to_field(v); }},
      {"problem.u", [](ExperimentConfig& c, std::string_view v) { c.u = to_field(v); }},
      {"problem.point_masses",
       [](ExperimentConfig& c, std::string_view v) {
         for (auto item : split(v, ';')) {
           const auto n = to_doubles(item, ',');
           if (n.size() != 3) throw BadValue{"point masses are 'x, y, mass' separated by ';'"};
           if (n[2] < 0) throw BadValue{"point masses must be nonnegative"};
           c.point_masses.emplace_back(Vec2(n[0], n[1]), n[2]);
         }
       }},
      {"problem.controls",
       [](ExperimentConfig& c, std::string_view v) {
         for (auto item : split(v, ';')) {
           const auto n = to_doubles(item, ',');
           if (n.size() != 3) throw BadValue{"controls are 'a11, a12, a22' separated by ';'"};
           Mat2 A;
           A << n[0], n[1], n[1], n[2];
           if (!(n[0] > 0 && A.determinant() > 0)) throw BadValue{"control matrices must be positive definite"};
           c.controls.push_back(A);
         }
       }},
      {"problem.quadrature",
       [](ExperimentConfig& c, std::string_view v) {
         v = trim(v);
         if (v == "centroid") c.quadrature = Quadrature::Centroid;
         else if (v == "gauss") c.quadrature = Quadrature::Gauss;
         else throw BadValue{"quadrature is 'centroid' or 'gauss'"};
       }},
      {"op.window", [](ExperimentConfig& c, std::string_view v) { c.op_window = int(to_int(v)); }},
      {"bcm.m",
       [](ExperimentConfig& c, std::string_view v) {
         c.bcm_m = int(to_int(v));
         if (c.bcm_m < 1) throw BadValue{"bcm.m must be at least 1"};
       }},
      {"fj.n_theta",
       [](ExperimentConfig& c, std::string_view v) {
         c.fj_n_theta = int(to_int(v));
         if (c.fj_n_theta < 1) throw BadValue{"fj.n_theta must be at least 1"};
       }},
      {"fj.n_lambda",
       [](ExperimentConfig& c, std::string_view v) {
         c.fj_n_lambda = int(to_int(v));
         if (c.fj_n_lambda < 1) throw BadValue{"fj.n_lambda must be at least 1"};
       }},
      {"convergence.rate_lo", [](ExperimentConfig& c, std::string_view v) { c.rate_lo = to_double(v); }},
      {"convergence.rate_hi", [](ExperimentConfig& c, std::string_view v) { c.rate_hi = to_double(v); }},
  };
  return table;
}

[[noreturn]] void fail(std::string_view origin, int line, const std::string& msg) {
  std::string where(origin);
  if (line > 0) where += ":" + std::to_string(line);
  throw Error(ErrorKind::ConfigError, where + ": " + msg);
}

}  // namespace

StudyOptions ExperimentConfig::study_options() const {
  StudyOptions o;
  o.tol = tol;
  o.bcm_m = bcm_m;
  o.fj_n_theta = fj_n_theta;
  o.fj_n_lambda = fj_n_lambda;
  o.quadrature = quadrature;
  return o;
}

ExperimentConfig parse_config(std::string_view text, std::string_view origin) {
  ExperimentConfig cfg;
  std::set<std::string, std::less<>> seen;
  std::string section;
  bool has_scheme = false;
  int line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = trim(line.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(origin, line_no, "unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section.empty()) fail(origin, line_no, "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(origin, line_no, "expected 'key = value'");
    const std::string_view raw_key = trim(line.substr(0, eq));
    if (raw_key.empty()) fail(origin, line_no, "missing key");
    const std::string key = section.empty() ? std::string(raw_key) : section + "." + std::string(raw_key);
    const auto it = handlers().find(key);
    if (it == handlers().end()) fail(origin, line_no, "unknown key '" + key + "'");
    if (!seen.insert(key).second) fail(origin, line_no, "duplicate key '" + key + "'");
    try {
      it->second(cfg, trim(line.substr(eq + 1)));
    } catch (const BadValue& e) {
      fail(origin, line_no, key + ": " + e.message);
    }
    has_scheme |= key == "scheme";
  }
  if (!has_scheme) fail(origin, 0, "missing required key 'scheme'");
  if (cfg.lo.has_value() != cfg.hi.has_value()) fail(origin, 0, "domain.lo and domain.hi go together");
  if (cfg.lo && !(cfg.lo->x() < cfg.hi->x() && cfg.lo->y() < cfg.hi->y()))
    fail(origin, 0, "domain.lo must be below domain.hi");
  if (!cfg.case_name && !cfg.g && !cfg.u) fail(origin, 0, "give a built-in case or boundary data problem.g");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, path + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

namespace {

ScalarField resolve(const FieldSpec& spec, bool density) {
  if (spec.case_name.empty()) return [c = spec.poly](const Vec2& x) { return eval_poly(c, x); };
  const auto c = builtin_case(spec.case_name);
  const ScalarField f = density ? c.density : c.exact;
  if (!f) throw Error(ErrorKind::ConfigError, "case '" + spec.case_name + "' has no " + (density ? "density" : "exact solution"));
  return f;
}

}  // namespace

ManufacturedCase build_case(const ExperimentConfig& cfg) {
  ManufacturedCase c;
  if (cfg.case_name) {
    c = builtin_case(*cfg.case_name);
  } else {
    c.name = "inline";
    c.exact = nullptr;
    c.boundary = nullptr;
    c.rate_lo = -std::numeric_limits<double>::infinity();
    c.rate_hi = std::numeric_limits<double>::infinity();
  }
  if (cfg.lo) {
    c.lo = *cfg.lo;
    c.hi = *cfg.hi;
  }
  if (!cfg.controls.empty()) {
    c.controls = cfg.controls;
    c.regularity = Regularity::HjbSmooth;
    c.density = nullptr;
    c.point_masses.clear();
    if (!cfg.f && !c.control_source) throw Error(ErrorKind::ConfigError, "controls need a source problem.f");
  }
  if (cfg.f) {
    if (!c.controls.empty()) {
      c.control_source = [f = resolve(*cfg.f, false)](int, const Vec2& x) { return f(x); };
    } else {
      c.density = resolve(*cfg.f, true);
      c.point_masses.clear();
    }
  }
  if (!cfg.point_masses.empty()) {
    if (!c.controls.empty()) throw Error(ErrorKind::ConfigError, "point masses need a Monge-Ampere problem");
    c.point_masses = cfg.point_masses;
    c.density = nullptr;
  }
  if (cfg.u) c.exact = resolve(*cfg.u, false);
  if (cfg.g) c.boundary = resolve(*cfg.g, false);
  else if (cfg.u) c.boundary = c.exact;
  if (cfg.op_window) c.op_window = *cfg.op_window;
  if (cfg.rate_lo) c.rate_lo = *cfg.rate_lo;
  if (cfg.rate_hi) c.rate_hi = *cfg.rate_hi;
  if (!c.boundary) throw Error(ErrorKind::ConfigError, "no boundary data");
  if (!c.supports(cfg.scheme))
    throw Error(ErrorKind::ConfigError,
                "case '" + c.name + "' cannot be solved with scheme " + std::string(to_string(cfg.scheme)));
  return c;
}

}  // namespace ellipsol
