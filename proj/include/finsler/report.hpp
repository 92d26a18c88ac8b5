#pragma once

#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "finsler/errors.hpp"
#include "finsler/geodesic.hpp"
#include "finsler/jacobi.hpp"

namespace finsler {

/// A single checked equality or residual bound; both sides are always
/// recorded so a failure message never reduces to a bare boolean.
struct Assertion {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double tol = 0.0;
  bool pass = false;
};

inline Assertion check_equal_int(const std::string& name, int lhs, int rhs) {
  return {name, static_cast<double>(lhs), static_cast<double>(rhs), 0.0, lhs == rhs};
}
inline Assertion check_below(const std::string& name, double value, double tol) {
  return {name, value, 0.0, tol, value <= tol};
}

struct Report {
  std::string scenario;
  std::uint64_t seed = 0;
  int dim = 0;
  double tau = 0.0;
  double L0 = 0.0;

  std::vector<FocalPoint> focal;
  int focal_sum = 0;

  int spectral_index = -1, spectral_nullity = -1;
  bool mesh_stable = true;
  int broken_index = -1, broken_nullity = -1;
  std::vector<double> partition;
  std::vector<double> eigen_head;

  bool has_Q = false;
  int pq_index = -1, pq_nullity = -1;
  int A_index = -1, A_nullity = -1;

  int restricted_index = -1, restricted_nullity = -1;
  int kernel_dim_tau = -1;

  std::map<std::string, double> residuals;
  std::vector<Assertion> assertions;
  std::map<std::string, double> timings_ms;  // excluded from the stable payload

  bool pass = true;

  void add(Assertion a) {
    pass = pass && a.pass;
    assertions.push_back(std::move(a));
  }
};

/// Deterministic structured payload: field order fixed, timings excluded.
inline nlohmann::ordered_json report_payload(const Report& r) {
  nlohmann::ordered_json j;
  j["scenario"] = r.scenario;
  j["seed"] = r.seed;
  j["dim"] = r.dim;
  j["tau"] = r.tau;
  j["L0"] = r.L0;
  nlohmann::ordered_json focal = nlohmann::ordered_json::array();
  for (const auto& f : r.focal)
    focal.push_back({{"t", f.t}, {"multiplicity", f.multiplicity}, {"certain", f.certain}});
  j["focal"] = focal;
  j["indices"] = {{"spectral_Pq", r.spectral_index},
                  {"focal_sum", r.focal_sum},
                  {"broken", r.broken_index}};
  if (r.has_Q) {
    j["indices"]["spectral_PQ"] = r.pq_index;
    j["indices"]["A_form"] = r.A_index;
  }
  j["nullities"] = {{"spectral_Pq", r.spectral_nullity},
                    {"broken", r.broken_nullity},
                    {"kernel_dim_tau", r.kernel_dim_tau}};
  if (r.has_Q) {
    j["nullities"]["spectral_PQ"] = r.pq_nullity;
    j["nullities"]["A_form"] = r.A_nullity;
  }
  j["restricted"] = {{"index", r.restricted_index}, {"nullity", r.restricted_nullity}};
  j["mesh_stable"] = r.mesh_stable;
  j["partition"] = r.partition;
  j["eigen_head"] = r.eigen_head;
  j["residuals"] = r.residuals;
  nlohmann::ordered_json asserts = nlohmann::ordered_json::array();
  for (const auto& a : r.assertions)
    asserts.push_back(
        {{"name", a.name}, {"lhs", a.lhs}, {"rhs", a.rhs}, {"tol", a.tol}, {"pass", a.pass}});
  j["assertions"] = asserts;
  j["pass"] = r.pass;
  return j;
}

/// Writes <name>.report.json (deterministic) and <name>.timings.csv.
inline void emit_report(const Report& r, const std::string& out_dir) {
  {
    std::ofstream out(out_dir + "/" + r.scenario + ".report.json");
    if (!out) throw Error("emit: cannot write report in '" + out_dir + "'");
    out << report_payload(r).dump(2) << "\n";
  }
  {
    std::ofstream out(out_dir + "/" + r.scenario + ".timings.csv");
    out << "stage,milliseconds\n";
    for (const auto& [k, v] : r.timings_ms) out << k << "," << v << "\n";
  }
}

/// CSV trace of the geodesic: t, chart position, velocity, L(velocity).
inline void emit_geodesic_trace(const Geodesic& geo, int samples, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("emit: cannot write trace '" + path + "'");
  const int n = geo.metric().dim();
  out << "t";
  for (int i = 1; i <= n; ++i) out << ",x" << i;
  for (int i = 1; i <= n; ++i) out << ",y" << i;
  out << ",L\n";
  out << std::setprecision(17);
  for (int s = 0; s < samples; ++s) {
    const double t = geo.tau() * s / (samples - 1);
    const TangentVector tv = geo.at(t);
    out << t;
    for (int i = 0; i < n; ++i) out << "," << tv.x[i];
    for (int i = 0; i < n; ++i) out << "," << tv.y[i];
    out << "," << geo.metric().eval_L(tv) << "\n";
  }
}

/// CSV trace of the focal scan: t, sigma_min and det of the normalized
/// P-Jacobi solution matrix.
inline void emit_focal_trace(const JacobiSolutionMatrix& basis, int samples,
                             const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("emit: cannot write trace '" + path + "'");
  out << "t,sigma_min,det\n";
  out << std::setprecision(17);
  for (int s = 0; s < samples; ++s) {
    const double t = basis.a() + (basis.b() - basis.a()) * (s + 1) / samples;
    const Eigen::MatrixXd M = basis.normalized(t);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    out << t << "," << svd.singularValues()(svd.singularValues().size() - 1) << ","
        << M.determinant() << "\n";
  }
}

}  // namespace finsler
