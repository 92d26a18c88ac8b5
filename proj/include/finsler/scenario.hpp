#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "finsler/errors.hpp"
#include "finsler/indexform.hpp"
#include "finsler/jacobi.hpp"
#include "finsler/metric.hpp"
#include "finsler/submanifold.hpp"

namespace finsler {

/// One endpoint submanifold declaration inside a scenario.
struct SubmanifoldSpec {
  std::string family = "none";  // none|point|line|circle|sphere|graph
  Eigen::VectorXd center;       // circle/sphere
  double radius = 1.0;
  Eigen::VectorXd point, dir;   // point/line
  int k = 0;                    // graph
  std::vector<std::string> exprs;
  Eigen::VectorXd u0;           // parameters of the geodesic endpoint

  bool present() const { return family != "none"; }

  Submanifold build(int n) const {
    if (family == "point") return Submanifold::point(point);
    if (family == "line") return Submanifold::line(point, dir);
    if (family == "circle") return Submanifold::circle(center, radius);
    if (family == "sphere") return Submanifold::sphere(center, radius);
    if (family == "graph") return Submanifold::graph(n, k, exprs);
    throw PreconditionError("scenario: unknown submanifold family '" + family + "'");
  }
};

/// Everything a verification run needs: metric, geodesic data, endpoint
/// submanifolds and the numeric overrides.
struct Scenario {
  std::string name = "unnamed";
  int dim = 2;

  std::string metric_family = "euclidean";
  std::vector<std::pair<std::pair<int, int>, std::string>> h_entries;
  std::vector<std::string> omega;
  std::string custom_L;

  bool bvp = false;
  Eigen::VectorXd start, velocity;  // IVP data
  Eigen::VectorXd target, v_guess;  // BVP data
  double tau = 1.0;

  SubmanifoldSpec P, Q;

  OdeOptions ode;
  int mesh_N = 256;
  double rank_tol = 1e-7;
  int scan_grid = 2048;
  int curvature_samples = 1025;
  std::uint64_t seed = 0;

  MetricPtr build_metric() const {
    if (metric_family == "euclidean") return std::make_shared<Metric>(Metric::euclidean(dim));
    if (metric_family == "riemannian")
      return std::make_shared<Metric>(Metric::riemannian(dim, h_entries));
    if (metric_family == "randers")
      return std::make_shared<Metric>(Metric::randers(dim, h_entries, omega));
    if (metric_family == "kropina")
      return std::make_shared<Metric>(Metric::kropina(dim, h_entries, omega));
    if (metric_family == "custom") return std::make_shared<Metric>(Metric::custom(dim, custom_L));
    throw PreconditionError("scenario: unknown metric family '" + metric_family + "'");
  }

  ReduceOptions reduce_options() const {
    ReduceOptions opts;
    opts.ode = ode;
    opts.rank_tol = rank_tol;
    opts.scan_grid = scan_grid;
    opts.curvature_samples = curvature_samples;
    return opts;
  }
};

namespace detail {

inline Eigen::VectorXd parse_vector(const std::string& text) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    vals.push_back(std::stod(item));
  }
  Eigen::VectorXd out(static_cast<int>(vals.size()));
  for (int i = 0; i < out.size(); ++i) out[i] = vals[static_cast<std::size_t>(i)];
  return out;
}

inline void parse_submanifold(const std::map<std::string, std::string>& kv,
                              const std::string& prefix, int dim, SubmanifoldSpec& spec) {
  auto get = [&](const std::string& key) -> const std::string* {
    auto it = kv.find(prefix + "." + key);
    return it == kv.end() ? nullptr : &it->second;
  };
  if (const auto* fam = get("family")) spec.family = *fam;
  if (!spec.present()) return;
  if (const auto* s = get("point")) spec.point = parse_vector(*s);
  if (const auto* s = get("dir")) spec.dir = parse_vector(*s);
  if (const auto* s = get("center")) spec.center = parse_vector(*s);
  if (const auto* s = get("radius")) spec.radius = std::stod(*s);
  if (const auto* s = get("u0")) spec.u0 = parse_vector(*s);
  if (const auto* s = get("k")) spec.k = std::stoi(*s);
  for (int i = 1; i <= dim; ++i)
    if (const auto* s = get("expr." + std::to_string(i))) spec.exprs.push_back(*s);
  if (spec.u0.size() == 0) spec.u0 = Eigen::VectorXd::Zero(0);
}

}  // namespace detail

/// Parses the flat key = value scenario format ('#' starts a comment).
inline Scenario parse_scenario(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r\n");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r\n");
      return s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!key.empty()) kv[key] = value;
  }

  Scenario s;
  auto get = [&](const std::string& key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  if (const auto* v = get("name")) s.name = *v;
  if (const auto* v = get("dim")) s.dim = std::stoi(*v);
  if (const auto* v = get("metric.family")) s.metric_family = *v;
  for (int i = 1; i <= s.dim; ++i)
    for (int j = i; j <= s.dim; ++j)
      if (const auto* v = get("metric.h." + std::to_string(i) + "." + std::to_string(j)))
        s.h_entries.push_back({{i, j}, *v});
  for (int i = 1; i <= s.dim; ++i)
    if (const auto* v = get("metric.omega." + std::to_string(i))) s.omega.push_back(*v);
  if (const auto* v = get("metric.L")) s.custom_L = *v;

  if (const auto* v = get("geodesic.type")) s.bvp = (*v == "bvp");
  if (const auto* v = get("geodesic.p")) s.start = detail::parse_vector(*v);
  if (const auto* v = get("geodesic.v")) s.velocity = detail::parse_vector(*v);
  if (const auto* v = get("geodesic.q")) s.target = detail::parse_vector(*v);
  if (const auto* v = get("geodesic.v_guess")) s.v_guess = detail::parse_vector(*v);
  if (const auto* v = get("geodesic.tau")) s.tau = std::stod(*v);

  detail::parse_submanifold(kv, "P", s.dim, s.P);
  detail::parse_submanifold(kv, "Q", s.dim, s.Q);

  if (const auto* v = get("mesh.N")) s.mesh_N = std::stoi(*v);
  if (const auto* v = get("ode.rtol")) s.ode.rtol = std::stod(*v);
  if (const auto* v = get("ode.atol")) s.ode.atol = std::stod(*v);
  if (const auto* v = get("rank.tol")) s.rank_tol = std::stod(*v);
  if (const auto* v = get("scan.grid")) s.scan_grid = std::stoi(*v);
  if (const auto* v = get("seed")) s.seed = std::stoull(*v);
  return s;
}

inline Scenario parse_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open scenario file '" + path + "'");
  return parse_scenario(in);
}

/// ---------------------------------------------------------------------
/// Built-in scenarios used by the verification suites and the CLI.
/// ---------------------------------------------------------------------

inline Scenario builtin_sphere_point(double tau, const std::string& name) {
  Scenario s;
  s.name = name;
  s.dim = 2;
  s.metric_family = "riemannian";
  s.h_entries = {{{1, 1}, "1"}, {{2, 2}, "sin(x1)^2"}};
  s.start = Eigen::Vector2d(1.5707963267948966, 0.0);
  s.velocity = Eigen::Vector2d(0.0, 1.0);
  s.tau = tau;
  s.P.family = "point";
  s.P.point = s.start;
  s.P.u0 = Eigen::VectorXd::Zero(0);
  return s;
}

inline Scenario builtin_euclid_circle(double tau, const std::string& name) {
  Scenario s;
  s.name = name;
  s.dim = 2;
  s.metric_family = "euclidean";
  s.start = Eigen::Vector2d(1.0, 0.0);
  s.velocity = Eigen::Vector2d(-1.0, 0.0);  // inward radial
  s.tau = tau;
  s.P.family = "circle";
  s.P.center = Eigen::Vector2d(0.0, 0.0);
  s.P.radius = 1.0;
  s.P.u0 = Eigen::VectorXd::Zero(1);
  return s;
}

inline Scenario builtin_sphere_in_r3(double tau, const std::string& name) {
  Scenario s;
  s.name = name;
  s.dim = 3;
  s.metric_family = "euclidean";
  s.P.family = "sphere";
  s.P.center = Eigen::Vector3d(0.0, 0.0, 0.0);
  s.P.radius = 1.0;
  s.P.u0 = Eigen::Vector2d(1.5707963267948966, 0.0);  // equator point (1,0,0)
  s.start = Eigen::Vector3d(1.0, 0.0, 0.0);
  s.velocity = Eigen::Vector3d(-1.0, 0.0, 0.0);
  s.tau = tau;
  return s;
}

inline Scenario builtin_point_to_circle(double tau, const std::string& name) {
  // P a point on the x-axis, Q the unit circle; tau = 2 hits the near side,
  // tau = 4 the far side, and start (0,0) with tau = 1 the center case.
  Scenario s;
  s.name = name;
  s.dim = 2;
  s.metric_family = "euclidean";
  s.tau = tau;
  s.P.family = "point";
  if (name == "euclid-center-to-circle") {
    s.start = Eigen::Vector2d(0.0, 0.0);
    s.Q.u0 = Eigen::VectorXd::Zero(1);
  } else {
    s.start = Eigen::Vector2d(-3.0, 0.0);
    s.Q.u0 = Eigen::VectorXd::Zero(1);
    if (tau == 2.0) {
      s.Q.u0[0] = 3.14159265358979323846;  // near side (-1, 0)
    }
  }
  s.P.point = s.start;
  s.P.u0 = Eigen::VectorXd::Zero(0);
  s.velocity = Eigen::Vector2d(1.0, 0.0);
  s.Q.family = "circle";
  s.Q.center = Eigen::Vector2d(0.0, 0.0);
  s.Q.radius = 1.0;
  return s;
}

inline Scenario builtin_kropina_wind(const std::string& name = "kropina-wind") {
  Scenario s;
  s.name = name;
  s.dim = 2;
  s.metric_family = "kropina";
  s.omega = {"-1", "0"};  // constant critical wind along +x1
  s.bvp = true;
  s.start = Eigen::Vector2d(0.0, 0.0);
  s.target = Eigen::Vector2d(2.0, 1.0);
  s.v_guess = Eigen::Vector2d(1.6, 0.6);
  s.tau = 1.0;
  s.P.family = "point";
  s.P.point = s.start;
  s.P.u0 = Eigen::VectorXd::Zero(0);
  return s;
}

inline std::vector<std::string> builtin_scenario_names() {
  return {"sphere-point-2.5",       "sphere-point-4",     "sphere-point-7",
          "euclid-circle-inward-0.5", "euclid-circle-inward-1.0", "euclid-circle-inward-1.5",
          "sphere3-inward-1.5",     "euclid-point-to-circle-near", "euclid-point-to-circle-far",
          "euclid-center-to-circle", "kropina-wind"};
}

inline Scenario builtin_scenario(const std::string& name) {
  if (name == "sphere-point-2.5") return builtin_sphere_point(2.5, name);
  if (name == "sphere-point-4") return builtin_sphere_point(4.0, name);
  if (name == "sphere-point-7") return builtin_sphere_point(7.0, name);
  if (name == "euclid-circle-inward-0.5") return builtin_euclid_circle(0.5, name);
  if (name == "euclid-circle-inward-1.0") return builtin_euclid_circle(1.0, name);
  if (name == "euclid-circle-inward-1.5") return builtin_euclid_circle(1.5, name);
  if (name == "sphere3-inward-1.5") return builtin_sphere_in_r3(1.5, name);
  if (name == "euclid-point-to-circle-near") return builtin_point_to_circle(2.0, name);
  if (name == "euclid-point-to-circle-far") return builtin_point_to_circle(4.0, name);
  if (name == "euclid-center-to-circle") return builtin_point_to_circle(1.0, name);
  if (name == "kropina-wind") return builtin_kropina_wind(name);
  throw Error("unknown built-in scenario '" + name + "'");
}

/// ---------------------------------------------------------------------
/// Randomized scenario family: h = identity + small symmetric polynomial
/// perturbation of degree <= 2 on the box, optionally with a small constant
/// Randers form; P a point or a centered circle/sphere.
/// ---------------------------------------------------------------------

inline std::string format_coeff(double c) {
  std::ostringstream ss;
  ss.precision(17);
  ss << c;
  std::string out = ss.str();
  if (!out.empty() && out[0] == '-') out = "(0" + out + ")";
  return out;
}

inline Scenario random_perturbed_scenario(std::uint64_t seed, bool with_Q) {
  Rng rng(0x5851f42d4c957f2dull ^ (seed * 0x9e3779b97f4a7c15ull + 0x123456789ull));
  Scenario s;
  s.name = (with_Q ? "ms2-random-" : "ms1-random-") + std::to_string(seed);
  s.seed = seed;
  s.dim = rng.uniform() < 0.5 ? 2 : 3;
  const int n = s.dim;
  const bool randers = rng.uniform() < 0.4;
  s.metric_family = randers ? "randers" : "riemannian";
  const double eps = rng.uniform(0.02, 0.1);
  auto var = [](int i) { return "x" + std::to_string(i); };
  for (int i = 1; i <= n; ++i)
    for (int j = i; j <= n; ++j) {
      std::ostringstream e;
      e << (i == j ? "1" : "0");
      e << " + " << format_coeff(eps * rng.uniform(-1.0, 1.0));
      for (int mth = 1; mth <= n; ++mth)
        e << " + " << format_coeff(eps / 4.0 * rng.uniform(-1.0, 1.0)) << "*" << var(mth);
      for (int a = 1; a <= n; ++a)
        for (int b = a; b <= n; ++b)
          e << " + " << format_coeff(eps / 16.0 * rng.uniform(-1.0, 1.0)) << "*" << var(a) << "*"
            << var(b);
      s.h_entries.push_back({{i, j}, e.str()});
    }
  if (randers) {
    for (int i = 1; i <= n; ++i)
      s.omega.push_back(format_coeff(rng.uniform(-0.15, 0.15) / std::sqrt(double(n))));
  }

  const bool point_P = rng.uniform() < 0.5;
  if (point_P) {
    s.P.family = "point";
    s.P.point = rng.vector(n, -0.3, 0.3);
    s.P.u0 = Eigen::VectorXd::Zero(0);
    s.start = s.P.point;
  } else {
    s.P.family = (n == 2) ? "circle" : "sphere";
    s.P.center = rng.vector(n, -0.1, 0.1);
    s.P.radius = rng.uniform(0.6, 1.4);
    if (n == 2) {
      s.P.u0 = Eigen::VectorXd::Constant(1, rng.uniform(0.0, 6.2831853));
    } else {
      s.P.u0 = Eigen::VectorXd(2);
      s.P.u0 << rng.uniform(0.7, 2.4), rng.uniform(0.0, 6.2831853);
    }
  }
  s.tau = rng.uniform(0.8, 2.2);

  // The start velocity is resolved against the built metric: an approximate
  // direction projected onto the normal cone of P, normalized to L = 1.
  MetricPtr m = s.build_metric();
  Eigen::VectorXd w = rng.vector(n, -1.0, 1.0);
  if (w.norm() < 0.3) w = Eigen::VectorXd::Unit(n, 0);
  w.normalize();
  if (s.P.family == "point") {
    s.velocity = w;
  } else {
    const Submanifold P = s.P.build(n);
    s.start = P.embed(s.P.u0);
    // bias towards the radial direction so the projection stays well-posed
    Eigen::VectorXd radial = s.start - s.P.center;
    radial.normalize();
    if (rng.uniform() < 0.5) radial = -radial;
    Eigen::VectorXd guess = (radial + 0.2 * w).normalized();
    s.velocity = project_to_normal_cone(*m, P, s.P.u0, guess);
  }
  const double L = m->eval_L(TangentVector(s.start, s.velocity));
  s.velocity /= std::sqrt(L);
  if (with_Q) s.Q.family = "deferred";  // resolved by the runner at gamma(tau)
  return s;
}

}  // namespace finsler
