#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "finsler/indexform.hpp"
#include "finsler/report.hpp"
#include "finsler/scenario.hpp"

namespace finsler {

struct RunOptions {
  bool mesh_stability = true;  // re-assemble at 2N and compare counts
  std::string out_dir;         // when set, emit report and traces
};

namespace detail {

class Stopwatch {
public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
        .count();
  }

private:
  std::chrono::steady_clock::time_point start_;
};

/// Replaces a deferred Q by the affine (n-1)-plane through gamma(tau)
/// spanned by a g-orthogonal complement of the final velocity.
inline void resolve_deferred_Q(Scenario& sc, const Geodesic& geo) {
  const int n = sc.dim;
  const Eigen::VectorXd q = geo.position(geo.tau());
  const Eigen::VectorXd vq = geo.velocity(geo.tau());
  const Eigen::MatrixXd G = geo.metric().fundamental_matrix(q, vq);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(vq.transpose() * G, Eigen::ComputeFullV);
  const Eigen::MatrixXd W = svd.matrixV().rightCols(n - 1);
  sc.Q.family = "graph";
  sc.Q.k = n - 1;
  sc.Q.exprs.clear();
  for (int i = 0; i < n; ++i) {
    std::ostringstream e;
    e << format_coeff(q[i]);
    for (int a = 0; a < n - 1; ++a)
      e << " + " << format_coeff(W(i, a)) << "*u" << (a + 1);
    sc.Q.exprs.push_back(e.str());
  }
  sc.Q.u0 = Eigen::VectorXd::Zero(n - 1);
}

inline double wronskian_residual(const JacobiSolutionMatrix& basis, int samples = 41) {
  // For P-Jacobi columns <v_i, vdot_j> - <vdot_i, v_j> vanishes identically.
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const double t = basis.a() + (basis.b() - basis.a()) * s / (samples - 1);
    const Eigen::MatrixXd V = basis.value(t), DV = basis.derivative(t);
    const Eigen::MatrixXd w = V.transpose() * DV - DV.transpose() * V;
    worst = std::max(worst, w.cwiseAbs().maxCoeff());
  }
  return worst;
}

inline int kernel_dimension_at(const JacobiSolutionMatrix& basis, double t, double rank_tol) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(basis.normalized(t));
  const Eigen::VectorXd s = svd.singularValues();
  int dim = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) < rank_tol * std::max(s(0), 1e-300)) ++dim;
  return dim;
}

}  // namespace detail

/// Full verification pipeline for one scenario; every theorem equality is
/// recorded as an assertion carrying both integers.
inline Report run_scenario(Scenario sc, const RunOptions& ro = {}) {
  Report rep;
  rep.scenario = sc.name;
  rep.seed = sc.seed;
  rep.dim = sc.dim;

  detail::Stopwatch total;
  MetricPtr metric = sc.build_metric();

  // --- geodesic ---------------------------------------------------------
  detail::Stopwatch sw_geo;
  std::optional<Geodesic> geo;
  if (sc.bvp) {
    geo.emplace(geodesic_bvp(metric, sc.start, sc.target, sc.tau, sc.v_guess, sc.ode));
  } else {
    geo.emplace(metric, sc.start, sc.velocity, sc.tau, sc.ode);
  }
  rep.timings_ms["geodesic"] = sw_geo.ms();
  rep.tau = geo->tau();
  rep.L0 = geo->L0();
  rep.residuals["L_drift"] = geo->conservation_drift();
  rep.add(check_below("geodesic.L_conservation", geo->conservation_drift(),
                      1e-8 * std::max(1.0, std::abs(geo->L0()))));

  // --- endpoint submanifold P -------------------------------------------
  if (!sc.P.present()) {
    sc.P.family = "point";
    sc.P.point = geo->position(0.0);
    sc.P.u0 = Eigen::VectorXd::Zero(0);
  }
  Submanifold P = sc.P.build(sc.dim);
  {
    const OrthogonalityReport orep = orthogonality_check(*geo, P, sc.P.u0);
    rep.residuals["orthogonality_P"] = orep.residual_start;
    rep.add(check_below("orthogonality.P", orep.residual_start, 1e-8));
  }

  // --- reduction ----------------------------------------------------------
  detail::Stopwatch sw_red;
  const ReduceOptions ropts = sc.reduce_options();
  ReducedJacobiSystem sys = reduce(*geo, P.k() > 0 ? &P : nullptr,
                                   P.k() > 0 ? &sc.P.u0 : nullptr, ropts);
  rep.timings_ms["reduce"] = sw_red.ms();
  rep.residuals["frame_gram"] = sys.frame().gram_residual();
  rep.residuals["r_asymmetry"] = sys.curvature_asymmetry();
  rep.residuals["r_radial"] = sys.radial_residual();
  rep.add(check_below("frame.orthonormality", sys.frame().gram_residual(), 1e-8));
  rep.add(check_below("curvature.symmetry", sys.curvature_asymmetry(), 1e-8));
  rep.add(check_below("curvature.radial_row", sys.radial_residual(), 1e-8));
  if (sys.k() > 0) {
    const double qasym = (sys.Q_form() - sys.Q_form().transpose()).cwiseAbs().maxCoeff();
    rep.residuals["Q_form_asymmetry"] = qasym;
    rep.add(check_below("Q_form.symmetry", qasym, 1e-9));
  }

  // --- P-Jacobi basis and focal scan --------------------------------------
  detail::Stopwatch sw_basis;
  JacobiSolutionMatrix basis = p_jacobi_basis(sys);
  rep.timings_ms["jacobi_basis"] = sw_basis.ms();
  rep.residuals["wronskian"] = detail::wronskian_residual(basis);
  rep.add(check_below("jacobi.wronskian", rep.residuals["wronskian"], 1e-8));
  {
    // Column n stays t sqrt(L0) e_n.
    const double t = 0.73 * sys.tau();
    Eigen::VectorXd expect = Eigen::VectorXd::Zero(sys.dim());
    expect[sys.dim() - 1] = t * std::sqrt(sys.L0());
    const double res = (basis.value(t).col(sys.dim() - 1) - expect).norm();
    rep.residuals["radial_column"] = res;
    rep.add(check_below("jacobi.radial_column", res, 1e-8 * std::max(1.0, t)));
  }

  detail::Stopwatch sw_focal;
  rep.focal = focal_points(sys, basis);
  rep.timings_ms["focal_scan"] = sw_focal.ms();
  rep.focal_sum = focal_index_sum(rep.focal, sys.tau());
  for (const auto& f : rep.focal)
    if (!f.certain)
      rep.add({"focal.certainty at t=" + std::to_string(f.t), static_cast<double>(f.multiplicity),
               0.0, 0.0, false});

  // --- spectral route ------------------------------------------------------
  AssembleOptions aopt;
  aopt.mesh_N = sc.mesh_N;
  detail::Stopwatch sw_spec;
  IndexResult spec;
  if (ro.mesh_stability) {
    spec = spectral_index_refined(sys, nullptr, aopt);
  } else {
    spec = spectral_index(assemble_Pq(sys, aopt), aopt.eps_neg, aopt.eps_null_floor);
  }
  rep.timings_ms["spectral"] = sw_spec.ms();
  rep.spectral_index = spec.index;
  rep.spectral_nullity = spec.nullity;
  rep.mesh_stable = spec.mesh_stable;
  rep.eigen_head = spec.head;
  if (ro.mesh_stability)
    rep.add({"spectral.mesh_stable", spec.mesh_stable ? 1.0 : 0.0, 1.0, 0.0, spec.mesh_stable});

  // --- broken-Jacobi route -------------------------------------------------
  detail::Stopwatch sw_broken;
  rep.partition = disconjugate_partition(sys, rep.focal);
  const BrokenJacobiForm broken = broken_jacobi_index(sys, basis, rep.partition);
  rep.timings_ms["broken"] = sw_broken.ms();
  rep.broken_index = broken.result.index;
  rep.broken_nullity = broken.result.nullity;
  rep.residuals["broken_asymmetry"] = broken.asym;
  if (broken.B.size() > 0)
    rep.add(check_below("broken.symmetry", broken.asym,
                        1e-7 * std::max(1.0, broken.B.cwiseAbs().maxCoeff())));

  // --- the Morse index equalities -----------------------------------------
  rep.add(check_equal_int("index.spectral_equals_focal_sum", rep.spectral_index, rep.focal_sum));
  rep.add(check_equal_int("index.broken_equals_focal_sum", rep.broken_index, rep.focal_sum));
  rep.kernel_dim_tau = detail::kernel_dimension_at(basis, sys.tau(), ropts.rank_tol);
  rep.add(check_equal_int("nullity.kernel_identity", rep.spectral_nullity, rep.kernel_dim_tau));

  // --- two-endpoint data ---------------------------------------------------
  std::optional<QEndData> qend;
  if (sc.Q.family == "deferred") detail::resolve_deferred_Q(sc, *geo);
  if (sc.Q.present()) {
    rep.has_Q = true;
    Submanifold Q = sc.Q.build(sc.dim);
    detail::Stopwatch sw_q;
    qend = q_end_data(sys, Q, sc.Q.u0);
    IndexResult pq;
    if (ro.mesh_stability) {
      pq = spectral_index_refined(sys, &*qend, aopt);
    } else {
      pq = spectral_index(assemble_PQ(sys, *qend, aopt), aopt.eps_neg, aopt.eps_null_floor);
    }
    rep.pq_index = pq.index;
    rep.pq_nullity = pq.nullity;
    if (ro.mesh_stability) {
      rep.mesh_stable = rep.mesh_stable && pq.mesh_stable;
      rep.add({"spectral.PQ_mesh_stable", pq.mesh_stable ? 1.0 : 0.0, 1.0, 0.0, pq.mesh_stable});
    }
    const EndpointFormA a_form = endpoint_form_A(sys, basis, *qend);
    rep.A_index = a_form.result.index;
    rep.A_nullity = a_form.result.nullity;
    rep.residuals["A_asymmetry"] = a_form.asym;
    rep.timings_ms["q_side"] = sw_q.ms();
    rep.add(check_equal_int("index.two_endpoint_sum", rep.pq_index, rep.spectral_index + rep.A_index));
  }

  // --- Proposition B -------------------------------------------------------
  {
    detail::Stopwatch sw_b;
    const IndexResult restr = normal_restricted_index(sys, qend ? &*qend : nullptr, aopt);
    rep.restricted_index = restr.index;
    rep.restricted_nullity = restr.nullity;
    rep.timings_ms["prop_b"] = sw_b.ms();
    const int full_index = qend ? rep.pq_index : rep.spectral_index;
    const int full_nullity = qend ? rep.pq_nullity : rep.spectral_nullity;
    rep.add(check_equal_int("propB.index", restr.index, full_index));
    rep.add(check_equal_int("propB.nullity", restr.nullity, full_nullity));
  }

  rep.timings_ms["total"] = total.ms();

  if (!ro.out_dir.empty()) {
    emit_report(rep, ro.out_dir);
    emit_geodesic_trace(*geo, sc.scan_grid, ro.out_dir + "/" + sc.name + ".trace_geodesic.csv");
    emit_focal_trace(basis, sc.scan_grid, ro.out_dir + "/" + sc.name + ".trace_focal.csv");
  }
  return rep;
}

/// Runs a scenario and, when tau sits too close to a focal instant for the
/// integer comparisons to be well-conditioned, backs tau into the middle of
/// the adjacent focal-free gap and reruns once.
inline Report run_scenario_tau_guarded(Scenario sc, const RunOptions& ro = {}) {
  Report rep = run_scenario(sc, ro);
  double nearest = 1e300;
  double prev = 0.0, prev_before_nearest = 0.0;
  for (const auto& f : rep.focal) {
    if (std::abs(f.t - sc.tau) < std::abs(nearest - sc.tau)) {
      nearest = f.t;
      prev_before_nearest = prev;
    }
    prev = f.t;
  }
  if (nearest < 1e299 && std::abs(nearest - sc.tau) < 0.05) {
    sc.tau = 0.5 * (prev_before_nearest + nearest);
    sc.name += "-tau-adjusted";
    rep = run_scenario(sc, ro);
  }
  return rep;
}

/// ---------------------------------------------------------------------
/// Verification suites.
/// ---------------------------------------------------------------------

struct SuiteCase {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct SuiteReport {
  std::string suite;
  std::vector<SuiteCase> cases;
  int total() const { return static_cast<int>(cases.size()); }
  int passed() const {
    int c = 0;
    for (const auto& k : cases) c += k.pass;
    return c;
  }
  bool pass() const { return passed() == total(); }
  void add(const std::string& name, bool ok, const std::string& detail = "") {
    cases.push_back({name, ok, detail});
  }
};

namespace detail {

struct RandomDrawMetric {
  MetricPtr metric;
  std::string kind;
};

inline RandomDrawMetric symmetry_draw_metric(Rng& rng, int n, int kind) {
  switch (kind % 4) {
    case 0: {
      const Scenario sc = random_perturbed_scenario(rng.uniform_int(1, 1 << 20), false);
      return {sc.build_metric(), "perturbed"};
    }
    case 1: {
      std::vector<std::string> omega;
      for (int i = 0; i < n; ++i) omega.push_back(format_coeff(rng.uniform(-0.2, 0.2)));
      return {std::make_shared<Metric>(Metric::randers(n, {}, omega)), "randers"};
    }
    case 2: {
      std::vector<std::string> omega;
      omega.push_back("-1");
      for (int i = 1; i < n; ++i) omega.push_back(format_coeff(rng.uniform(-0.2, 0.2)));
      return {std::make_shared<Metric>(Metric::kropina(n, {}, omega)), "kropina"};
    }
    default:
      return {std::make_shared<Metric>(
                  Metric::riemannian(2, {{{1, 1}, "1"}, {{2, 2}, "sin(x1)^2"}})),
              "sphere"};
  }
}

inline Eigen::VectorXd symmetry_draw_vector(Rng& rng, const RandomDrawMetric& dm, int n) {
  Eigen::VectorXd v = rng.vector(n, -1.0, 1.0);
  if (dm.kind == "kropina") v[0] = rng.uniform(0.4, 1.5);  // omega(v) < 0
  if (v.norm() < 0.2) v = Eigen::VectorXd::Unit(n, 0);
  return v;
}

inline Eigen::VectorXd symmetry_draw_point(Rng& rng, const RandomDrawMetric& dm, int n) {
  if (dm.kind == "sphere") {
    Eigen::VectorXd x(2);
    x << rng.uniform(0.6, 2.5), rng.uniform(0.0, 6.28);
    return x;
  }
  return rng.vector(n, -0.8, 0.8);
}

}  // namespace detail

/// Identity-residual sweep (homogeneity, fundamental/Cartan identities, the
/// curvature symmetries, metric compatibility, Wronskian constancy, frame
/// orthonormality): `draws` randomized draws split between pointwise and
/// along-geodesic checks.
inline SuiteReport verify_symmetry_suite(std::uint64_t base_seed = 7, int draws = 200) {
  SuiteReport suite;
  suite.suite = "symmetry";
  Rng rng(base_seed * 0x9e3779b97f4a7c15ull + 1);

  const int pointwise = draws * 3 / 5;
  for (int d = 0; d < pointwise; ++d) {
    const int n = rng.uniform() < 0.5 ? 2 : 3;
    const auto dm = detail::symmetry_draw_metric(rng, n, d);
    const int nn = dm.metric->dim();
    const Eigen::VectorXd x = detail::symmetry_draw_point(rng, dm, nn);
    const Eigen::VectorXd v = detail::symmetry_draw_vector(rng, dm, nn);
    const TangentVector tv(x, v);
    if (!dm.metric->in_domain(tv)) {
      suite.add("draw-" + std::to_string(d), false, "draw outside domain");
      continue;
    }
    std::ostringstream why;
    bool ok = true;
    const double L = dm.metric->eval_L(tv);
    for (double lam : {0.5, 2.0, 7.3}) {
      const double Ll = dm.metric->eval_L(TangentVector(x, lam * v));
      if (std::abs(Ll - lam * lam * L) > 1e-10 * std::max(1.0, std::abs(L) * lam * lam)) {
        ok = false;
        why << "homogeneity(" << lam << ") ";
      }
    }
    const FundamentalTensor ft = dm.metric->fundamental_tensor(tv);
    for (double lam : {0.5, 2.0, 7.3}) {
      const FundamentalTensor fl = dm.metric->fundamental_tensor(TangentVector(x, lam * v));
      if ((fl.g - ft.g).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, ft.g.cwiseAbs().maxCoeff())) {
        ok = false;
        why << "g-scale-invariance(" << lam << ") ";
      }
    }
    if (std::abs(v.dot(ft.g * v) - L) > 1e-10 * std::max(1.0, std::abs(L))) {
      ok = false;
      why << "g(v,v)=L ";
    }
    const CartanTensor ct = dm.metric->cartan_tensor(tv);
    const Eigen::VectorXd u = rng.vector(nn, -1.0, 1.0), w = rng.vector(nn, -1.0, 1.0);
    double contraction = 0.0, cmax = 0.0;
    for (int i = 0; i < nn; ++i)
      for (int j = 0; j < nn; ++j)
        for (int kk = 0; kk < nn; ++kk) {
          contraction += ct.C(i, j, kk) * v[i] * u[j] * w[kk];
          cmax = std::max(cmax, std::abs(ct.C(i, j, kk)));
        }
    if (std::abs(contraction) > 1e-10 * std::max(1.0, cmax)) {
      ok = false;
      why << "cartan-contraction ";
    }
    if (dm.metric->quadratic_in_y() && cmax > 1e-12) {
      ok = false;
      why << "riemannian-cartan-zero ";
    }
    // curvature symmetries
    const double s1 = flag_curvature_form(*dm.metric, tv, u, w);
    const double s2 = flag_curvature_form(*dm.metric, tv, w, u);
    const double scale = std::max({1.0, std::abs(s1), std::abs(s2)});
    if (std::abs(s1 - s2) > 1e-9 * scale) {
      ok = false;
      why << "Rsym7 ";
    }
    {
      const CurvatureData cd = hh_curvature(*dm.metric, tv);
      const Eigen::VectorXd r1 = curvature_apply(cd, u, v, v);  // R(u,v)v
      const Eigen::VectorXd r2 = curvature_apply(cd, u, v, w);  // R(u,v)w
      const double lhs = r1.dot(ft.g * w);
      const double rhs = -r2.dot(ft.g * v);
      if (std::abs(lhs - rhs) > 1e-9 * std::max({1.0, std::abs(lhs), std::abs(rhs)})) {
        ok = false;
        why << "Rsym8 ";
      }
    }
    suite.add("pointwise-" + std::to_string(d) + "-" + dm.kind, ok, why.str());
  }

  // Along-geodesic draws: compatibility, Wronskian, frame orthonormality.
  // The compatibility check differentiates dense interpolants, so these
  // trajectories are integrated tighter than the defaults.
  OdeOptions tight;
  tight.rtol = 1e-12;
  tight.atol = 1e-14;
  const int remaining = draws - pointwise;
  const int geodesics = 8;
  const int per_geo = (remaining + geodesics - 1) / geodesics;
  int emitted = 0;
  for (int gidx = 0; gidx < geodesics && emitted < remaining; ++gidx) {
    const auto dm = detail::symmetry_draw_metric(rng, 2, gidx);
    const int nn = dm.metric->dim();
    const Eigen::VectorXd x0 = detail::symmetry_draw_point(rng, dm, nn);
    Eigen::VectorXd v0 = detail::symmetry_draw_vector(rng, dm, nn);
    const double L = dm.metric->eval_L(TangentVector(x0, v0));
    v0 /= std::sqrt(std::abs(L));
    const double tau = 0.8;
    Geodesic geo(dm.metric, x0, v0, tau, tight);
    ReduceOptions ropts;
    ropts.ode = tight;
    ReducedJacobiSystem sys = reduce(geo, nullptr, nullptr, ropts);
    JacobiSolutionMatrix basis = p_jacobi_basis(sys);
    VectorFieldAlong X = parallel_transport(geo, rng.vector(nn, -1.0, 1.0), tight);
    VectorFieldAlong Y = parallel_transport(geo, rng.vector(nn, -1.0, 1.0), tight);
    const double gram = sys.frame().gram_residual();
    const double wr = detail::wronskian_residual(basis);
    for (int d = 0; d < per_geo && emitted < remaining; ++d, ++emitted) {
      const double t = rng.uniform(0.1 * tau, 0.9 * tau);
      std::ostringstream why;
      bool ok = true;
      // compatibility (e:compat) with xi = velocity, so the Cartan term is
      // absent: zeta = sin(t) X, eta = Y parallel.
      auto scalar = [&](double tt) {
        const TangentVector tv = geo.at(tt);
        const Eigen::MatrixXd g = dm.metric->fundamental_matrix(tv.x, tv.y);
        return std::sin(tt) * X(tt).dot(g * Y(tt));
      };
      const double h = 1e-5;
      const double lhs =
          (-scalar(t + 2 * h) + 8 * scalar(t + h) - 8 * scalar(t - h) + scalar(t - 2 * h)) /
          (12 * h);
      const TangentVector tv = geo.at(t);
      const Eigen::MatrixXd g = dm.metric->fundamental_matrix(tv.x, tv.y);
      const double rhs = std::cos(t) * X(t).dot(g * Y(t));
      if (std::abs(lhs - rhs) > 1e-7 * std::max(1.0, std::abs(rhs))) {
        ok = false;
        why << "compat(" << std::abs(lhs - rhs) << ") ";
      }
      if (gram > 1e-8) {
        ok = false;
        why << "frame-gram ";
      }
      if (wr > 1e-8) {
        ok = false;
        why << "wronskian ";
      }
      // parallel transport preserves the g-norm
      const double n0 = X(0.0).dot(dm.metric->fundamental_matrix(x0, v0) * X(0.0));
      const double nt = X(t).dot(g * X(t));
      if (std::abs(nt - n0) > 1e-8 * std::max(1.0, std::abs(n0))) {
        ok = false;
        why << "transport-norm ";
      }
      suite.add("geodesic-" + std::to_string(gidx) + "-draw-" + std::to_string(d), ok, why.str());
    }
  }
  return suite;
}

/// MS1 randomized sweep: spectral index == focal sum == broken index on
/// seeded perturbed-metric scenarios, as exact integers.
inline SuiteReport verify_ms1_random(int seeds = 50, std::uint64_t base_seed = 1,
                                     const std::string& out_dir = "") {
  SuiteReport suite;
  suite.suite = "ms1-random";
  for (int s = 0; s < seeds; ++s) {
    const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(s);
    RunOptions ro;
    ro.mesh_stability = false;
    ro.out_dir = out_dir;
    try {
      Scenario sc = random_perturbed_scenario(seed, false);
      const Report rep = run_scenario_tau_guarded(sc, ro);
      const bool ok = rep.spectral_index == rep.focal_sum && rep.broken_index == rep.focal_sum;
      std::ostringstream det;
      det << "spectral=" << rep.spectral_index << " focal=" << rep.focal_sum
          << " broken=" << rep.broken_index;
      suite.add("seed-" + std::to_string(seed), ok, det.str());
    } catch (const Error& e) {
      suite.add("seed-" + std::to_string(seed), false, e.what());
    }
  }
  return suite;
}

/// MS2 randomized sweep with a deferred perpendicular Q at gamma(tau).
inline SuiteReport verify_ms2_random(int seeds = 20, std::uint64_t base_seed = 101,
                                     const std::string& out_dir = "") {
  SuiteReport suite;
  suite.suite = "ms2-random";
  for (int s = 0; s < seeds; ++s) {
    const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(s);
    RunOptions ro;
    ro.mesh_stability = false;
    ro.out_dir = out_dir;
    try {
      Scenario sc = random_perturbed_scenario(seed, true);
      const Report rep = run_scenario_tau_guarded(sc, ro);
      const bool ok = rep.has_Q && rep.pq_index == rep.spectral_index + rep.A_index;
      std::ostringstream det;
      det << "PQ=" << rep.pq_index << " Pq=" << rep.spectral_index << " A=" << rep.A_index;
      suite.add("seed-" + std::to_string(seed), ok, det.str());
    } catch (const Error& e) {
      suite.add("seed-" + std::to_string(seed), false, e.what());
    }
  }
  return suite;
}

/// Proposition B: restricted and unrestricted (index, nullity) coincide on
/// the deterministic scenarios and a random family.
inline SuiteReport verify_propB(int seeds = 20, std::uint64_t base_seed = 301,
                                const std::string& out_dir = "") {
  SuiteReport suite;
  suite.suite = "propB";
  RunOptions ro;
  ro.mesh_stability = false;
  ro.out_dir = out_dir;
  for (const auto& name : builtin_scenario_names()) {
    if (name == "kropina-wind") continue;  // BVP case covered by its own suite
    try {
      const Report rep = run_scenario(builtin_scenario(name), ro);
      const int full_index = rep.has_Q ? rep.pq_index : rep.spectral_index;
      const int full_null = rep.has_Q ? rep.pq_nullity : rep.spectral_nullity;
      const bool ok = rep.restricted_index == full_index && rep.restricted_nullity == full_null;
      std::ostringstream det;
      det << "restricted=(" << rep.restricted_index << "," << rep.restricted_nullity << ") full=("
          << full_index << "," << full_null << ")";
      suite.add(name, ok, det.str());
    } catch (const Error& e) {
      suite.add(name, false, e.what());
    }
  }
  for (int s = 0; s < seeds; ++s) {
    const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(s);
    try {
      Scenario sc = random_perturbed_scenario(seed, s % 2 == 1);
      const Report rep = run_scenario_tau_guarded(sc, ro);
      const int full_index = rep.has_Q ? rep.pq_index : rep.spectral_index;
      const int full_null = rep.has_Q ? rep.pq_nullity : rep.spectral_nullity;
      const bool ok = rep.restricted_index == full_index && rep.restricted_nullity == full_null;
      std::ostringstream det;
      det << "restricted=(" << rep.restricted_index << "," << rep.restricted_nullity << ") full=("
          << full_index << "," << full_null << ")";
      suite.add("seed-" + std::to_string(seed), ok, det.str());
    } catch (const Error& e) {
      suite.add("seed-" + std::to_string(seed), false, e.what());
    }
  }
  return suite;
}

/// Index-lemma trials on a focal-free scenario.
inline SuiteReport verify_index_lemma(int trials = 100, std::uint64_t base_seed = 11) {
  SuiteReport suite;
  suite.suite = "index-lemma";
  try {
    Scenario sc = builtin_scenario("euclid-circle-inward-0.5");
    MetricPtr m = sc.build_metric();
    Geodesic geo(m, sc.start, sc.velocity, sc.tau, sc.ode);
    Submanifold P = sc.P.build(sc.dim);
    ReducedJacobiSystem sys = reduce(geo, &P, &sc.P.u0, sc.reduce_options());
    JacobiSolutionMatrix basis = p_jacobi_basis(sys);
    Rng rng(base_seed);
    const IndexLemmaReport rep = index_lemma_check(sys, basis, trials, rng);
    std::ostringstream det;
    det << rep.passes << "/" << rep.trials << " min_gap=" << rep.min_gap;
    suite.add("trials", rep.passes == rep.trials, det.str());

    // Equality case: X equal to a P-Jacobi field gives the endpoint value.
    const double tau = sys.tau();
    Eigen::VectorXd c = Eigen::VectorXd::Zero(sys.dim());
    c[0] = 1.0;
    const int nodes = 513;
    std::vector<double> ts(nodes);
    Eigen::MatrixXd vals(sys.dim(), nodes);
    for (int i = 0; i < nodes; ++i) {
      ts[i] = tau * i / (nodes - 1);
      vals.col(i) = basis.value(ts[i]) * c;
    }
    const double quad = pl_form_value(sys, ts, vals);
    const double endpoint = (basis.derivative(tau) * c).dot(basis.value(tau) * c);
    suite.add("equality-case", std::abs(quad - endpoint) < 1e-6 * std::max(1.0, std::abs(endpoint)),
              "quadrature=" + std::to_string(quad) + " endpoint=" + std::to_string(endpoint));
  } catch (const Error& e) {
    suite.add("setup", false, e.what());
  }
  return suite;
}

/// Exponential-map differentials against central finite differences, plus
/// the focal rank-drop location of the normal exponential.
inline SuiteReport verify_exp_jacobi(int draws = 20, std::uint64_t base_seed = 23) {
  SuiteReport suite;
  suite.suite = "exp-jacobi";
  Rng rng(base_seed * 0x9e3779b97f4a7c15ull + 5);
  const double fd_eps = 1e-4;

  for (int d = 0; d < draws; ++d) {
    try {
      const auto dm = detail::symmetry_draw_metric(rng, 2, d % 2 == 0 ? 0 : 1);
      const int n = dm.metric->dim();
      const Eigen::VectorXd p = detail::symmetry_draw_point(rng, dm, n);
      Eigen::VectorXd v = detail::symmetry_draw_vector(rng, dm, n);
      v /= std::sqrt(std::abs(dm.metric->eval_L(TangentVector(p, v))));
      v *= rng.uniform(0.5, 1.0);
      Eigen::VectorXd w = rng.vector(n, -1.0, 1.0);
      const Eigen::VectorXd jexp = exp_differential(dm.metric, p, v, w);
      const Eigen::VectorXd fd =
          (exp_map(dm.metric, p, v + fd_eps * w) - exp_map(dm.metric, p, v - fd_eps * w)) /
          (2.0 * fd_eps);
      const double rel = (jexp - fd).norm() / std::max(1.0, fd.norm());
      suite.add("exp-draw-" + std::to_string(d) + "-" + dm.kind, rel <= 1e-5,
                "rel=" + std::to_string(rel));
    } catch (const Error& e) {
      suite.add("exp-draw-" + std::to_string(d), false, e.what());
    }
  }

  // Normal exponential against finite differences along curves in TP-perp.
  for (int d = 0; d < draws; ++d) {
    try {
      const bool euclid = d % 2 == 0;
      MetricPtr m;
      if (euclid) {
        m = std::make_shared<Metric>(Metric::euclidean(2));
      } else {
        std::vector<std::string> omega = {format_coeff(rng.uniform(-0.15, 0.15)),
                                          format_coeff(rng.uniform(-0.15, 0.15))};
        m = std::make_shared<Metric>(Metric::randers(2, {}, omega));
      }
      Submanifold P = Submanifold::circle(Eigen::Vector2d(0.0, 0.0), 1.0);
      Eigen::VectorXd u0 = Eigen::VectorXd::Constant(1, rng.uniform(0.0, 6.28));
      const Eigen::VectorXd p = P.embed(u0);
      Eigen::VectorXd radial = -p.normalized() * rng.uniform(0.4, 0.7);
      const Eigen::VectorXd v = project_to_normal_cone(*m, P, u0, radial);

      // A curve in TP-perp: parameters move along P, the fiber vector is
      // re-projected pointwise; its chart derivative feeds the Jacobi IVP.
      auto curve = [&](double s) -> std::pair<Eigen::VectorXd, Eigen::VectorXd> {
        Eigen::VectorXd us = u0;
        us[0] += s;
        Eigen::VectorXd base = v + s * Eigen::Vector2d(0.13, -0.21);
        const Eigen::VectorXd z = project_to_normal_cone(*m, P, us, base);
        return {us, z};
      };
      auto exp_at = [&](double s) {
        const auto [us, z] = curve(s);
        return normal_exp(m, P, us, z);
      };
      const Eigen::VectorXd fd =
          (exp_at(fd_eps) - exp_at(-fd_eps)) / (2.0 * fd_eps);
      const auto [up, zp] = curve(fd_eps);
      const auto [um, zm] = curve(-fd_eps);
      const Eigen::VectorXd dx = (P.embed(up) - P.embed(um)) / (2.0 * fd_eps);
      const Eigen::VectorXd dy = (zp - zm) / (2.0 * fd_eps);
      const Eigen::VectorXd jn = normal_exp_differential(m, P, u0, v, dx, dy);
      const double rel = (jn - fd).norm() / std::max(1.0, fd.norm());
      suite.add("normal-exp-draw-" + std::to_string(d), rel <= 1e-5, "rel=" + std::to_string(rel));
    } catch (const Error& e) {
      suite.add("normal-exp-draw-" + std::to_string(d), false, e.what());
    }
  }

  // Rank drop of D exp^{LN} at the focal instant of the unit circle.
  try {
    MetricPtr m = std::make_shared<Metric>(Metric::euclidean(2));
    Submanifold P = Submanifold::circle(Eigen::Vector2d(0.0, 0.0), 1.0);
    Eigen::VectorXd u0 = Eigen::VectorXd::Zero(1);
    const Eigen::VectorXd v = Eigen::Vector2d(-1.0, 0.0);  // unit inward normal

    Scenario sc = builtin_scenario("euclid-circle-inward-1.5");
    MetricPtr m2 = sc.build_metric();
    Geodesic geo(m2, sc.start, sc.velocity, sc.tau, sc.ode);
    Submanifold P2 = sc.P.build(2);
    ReducedJacobiSystem sys = reduce(geo, &P2, &sc.P.u0, sc.reduce_options());
    JacobiSolutionMatrix basis = p_jacobi_basis(sys);
    const auto focal = focal_points(sys, basis);
    if (focal.empty()) throw Error("no focal instant detected for the circle scenario");
    const double t_focal = focal.front().t;

    auto sigma_min_at = [&](double t) {
      const auto dirs = normal_bundle_tangent_basis(*m, P, u0, t * v);
      Eigen::MatrixXd D(2, static_cast<int>(dirs.size()));
      for (std::size_t c = 0; c < dirs.size(); ++c)
        D.col(static_cast<int>(c)) =
            normal_exp_differential(m, P, u0, t * v, dirs[c].first, dirs[c].second);
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(D);
      return svd.singularValues()(svd.singularValues().size() - 1);
    };
    // Golden-section minimum of the differential's smallest singular value.
    double lo = 0.8, hi = 1.2;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c1 = hi - gr * (hi - lo), c2 = lo + gr * (hi - lo);
    double f1 = sigma_min_at(c1), f2 = sigma_min_at(c2);
    while (hi - lo > 1e-8) {
      if (f1 < f2) {
        hi = c2;
        c2 = c1;
        f2 = f1;
        c1 = hi - gr * (hi - lo);
        f1 = sigma_min_at(c1);
      } else {
        lo = c1;
        c1 = c2;
        f1 = f2;
        c2 = lo + gr * (hi - lo);
        f2 = sigma_min_at(c2);
      }
    }
    const double t_drop = 0.5 * (lo + hi);
    suite.add("rank-drop-location", std::abs(t_drop - t_focal) <= 1e-6,
              "t_drop=" + std::to_string(t_drop) + " focal=" + std::to_string(t_focal));
  } catch (const Error& e) {
    suite.add("rank-drop-location", false, e.what());
  }
  return suite;
}

/// Kropina navigation under constant critical wind: the shooting geodesic
/// exists, has no conjugate point on (0, 1) and index zero.
inline SuiteReport verify_kropina(const std::string& out_dir = "") {
  SuiteReport suite;
  suite.suite = "kropina";
  RunOptions ro;
  ro.out_dir = out_dir;
  try {
    const Report rep = run_scenario(builtin_scenario("kropina-wind"), ro);
    suite.add("shooting-converged", true, "");
    bool interior_focal = false;
    for (const auto& f : rep.focal) interior_focal = interior_focal || f.t < rep.tau - 1e-7;
    suite.add("no-conjugate-points", !interior_focal, "");
    std::ostringstream det;
    det << "spectral=" << rep.spectral_index << " broken=" << rep.broken_index;
    suite.add("index-zero", rep.spectral_index == 0 && rep.broken_index == 0 && rep.focal_sum == 0,
              det.str());
  } catch (const Error& e) {
    suite.add("shooting-converged", false, e.what());
  }
  return suite;
}

/// Deterministic MS1 scenarios (the acceptance set).
inline SuiteReport verify_ms1_deterministic(const std::string& out_dir = "") {
  SuiteReport suite;
  suite.suite = "ms1-deterministic";
  struct Expect {
    const char* name;
    int index;
  };
  const Expect cases[] = {{"sphere-point-2.5", 0}, {"sphere-point-4", 1}, {"sphere-point-7", 2},
                          {"euclid-circle-inward-0.5", 0}, {"euclid-circle-inward-1.5", 1},
                          {"sphere3-inward-1.5", 2}};
  for (const auto& c : cases) {
    RunOptions ro;
    ro.out_dir = out_dir;
    try {
      const Report rep = run_scenario(builtin_scenario(c.name), ro);
      const bool ok = rep.spectral_index == c.index && rep.focal_sum == c.index &&
                      rep.broken_index == c.index;
      std::ostringstream det;
      det << "spectral=" << rep.spectral_index << " focal=" << rep.focal_sum
          << " broken=" << rep.broken_index << " expected=" << c.index;
      suite.add(c.name, ok, det.str());
    } catch (const Error& e) {
      suite.add(c.name, false, e.what());
    }
  }
  return suite;
}

inline SuiteReport verify_suite(const std::string& name, std::uint64_t seed = 0,
                                const std::string& out_dir = "") {
  if (name == "symmetry") return verify_symmetry_suite(seed ? seed : 7);
  if (name == "ms1-random") return verify_ms1_random(50, seed ? seed : 1, out_dir);
  if (name == "ms2-random") return verify_ms2_random(20, seed ? seed : 101, out_dir);
  if (name == "propB") return verify_propB(20, seed ? seed : 301, out_dir);
  if (name == "index-lemma") return verify_index_lemma(100, seed ? seed : 11);
  if (name == "exp-jacobi") return verify_exp_jacobi(20, seed ? seed : 23);
  if (name == "kropina") return verify_kropina(out_dir);
  if (name == "ms1-deterministic") return verify_ms1_deterministic(out_dir);
  throw Error("unknown verification suite '" + name + "'");
}

inline std::vector<std::string> suite_names() {
  return {"symmetry",    "ms1-deterministic", "ms1-random", "ms2-random",
          "propB",       "index-lemma",       "exp-jacobi", "kropina"};
}

}  // namespace finsler
