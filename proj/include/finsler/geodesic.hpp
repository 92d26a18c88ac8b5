#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "finsler/connection.hpp"
#include "finsler/errors.hpp"
#include "finsler/metric.hpp"
#include "finsler/ode.hpp"

namespace finsler {

/// Integrated geodesic with dense interpolable position and velocity.
/// L(velocity) is conserved along the solution; the residual drift is kept
/// for the verification report.
class Geodesic {
public:
  Geodesic(MetricPtr metric, Eigen::VectorXd p, Eigen::VectorXd v, double tau,
           const OdeOptions& opt = {})
      : metric_(std::move(metric)), tau_(tau) {
    if (!(tau > 0.0)) throw PreconditionError("geodesic: need tau > 0");
    const Metric& m = *metric_;
    m.require_domain(TangentVector(p, v));
    const int n = m.dim();
    L0_ = m.eval_L(TangentVector(p, v));

    OdeRhs rhs = [&m, n](double, const Eigen::VectorXd& u, Eigen::VectorXd& du) {
      du.resize(2 * n);
      du.head(n) = u.tail(n);
      du.tail(n) = -geodesic_spray(m, u.head(n), u.tail(n));
    };
    OdePredicate inside = [&m, n](double, const Eigen::VectorXd& u) {
      return m.in_domain(u.head(n), u.tail(n));
    };
    Eigen::VectorXd u0(2 * n);
    u0 << p, v;
    sol_ = integrate_dopri5(rhs, 0.0, u0, tau, opt, &inside);

    drift_ = 0.0;
    for (double t : sol_.mesh()) {
      const double l = m.eval_L(at(t));
      drift_ = std::max(drift_, std::abs(l - L0_));
    }
  }

  const Metric& metric() const { return *metric_; }
  const MetricPtr& metric_ptr() const { return metric_; }
  double tau() const { return tau_; }
  double L0() const { return L0_; }
  double conservation_drift() const { return drift_; }
  const std::vector<double>& mesh() const { return sol_.mesh(); }

  Eigen::VectorXd position(double t) const {
    const int n = metric_->dim();
    return sol_(t).head(n);
  }
  Eigen::VectorXd velocity(double t) const {
    const int n = metric_->dim();
    return sol_(t).tail(n);
  }
  TangentVector at(double t) const {
    const Eigen::VectorXd u = sol_(t);
    const int n = metric_->dim();
    return TangentVector(u.head(n), u.tail(n));
  }

private:
  MetricPtr metric_;
  double tau_;
  double L0_ = 0.0;
  double drift_ = 0.0;
  OdeSolution sol_;
};

inline Geodesic geodesic_ivp(MetricPtr m, const Eigen::VectorXd& p, const Eigen::VectorXd& v,
                             double tau, const OdeOptions& opt = {}) {
  return Geodesic(std::move(m), p, v, tau, opt);
}

/// Covariant derivative along a curve with an admissible reference field:
/// (D^xi_cdot zeta)^m = zetadot^m + zeta^i cdot^j Gamma^m_ij(c, xi).
/// When no zeta derivative is supplied it is taken by a five-point stencil.
inline Eigen::VectorXd covariant_derivative_along(
    const Metric& m, const std::function<Eigen::VectorXd(double)>& c,
    const std::function<Eigen::VectorXd(double)>& cdot,
    const std::function<Eigen::VectorXd(double)>& xi,
    const std::function<Eigen::VectorXd(double)>& zeta, double t,
    const std::function<Eigen::VectorXd(double)>& zeta_dot = nullptr) {
  const Eigen::VectorXd x = c(t), v = cdot(t), ref = xi(t), z = zeta(t);
  if (!m.in_domain(x, ref))
    throw DomainError("covariant derivative: reference field left the conic domain");
  Eigen::VectorXd zd;
  if (zeta_dot) {
    zd = zeta_dot(t);
  } else {
    const double h = 1e-4 * std::max(1.0, std::abs(t));
    zd = (-zeta(t + 2 * h) + 8.0 * zeta(t + h) - 8.0 * zeta(t - h) + zeta(t - 2 * h)) / (12.0 * h);
  }
  const Grid3<double> Gamma = chern_coefficients(m, x, ref);
  const int n = m.dim();
  Eigen::VectorXd out = zd;
  for (int mm = 0; mm < n; ++mm) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) acc += z[i] * v[j] * Gamma(mm, i, j);
    out[mm] += acc;
  }
  return out;
}

/// A dense vector field along a geodesic (parallel transport result).
class VectorFieldAlong {
public:
  VectorFieldAlong(OdeSolution sol, int n) : sol_(std::move(sol)), n_(n) {}
  Eigen::VectorXd operator()(double t) const { return sol_(t).head(n_); }

private:
  OdeSolution sol_;
  int n_;
};

/// Parallel transport of X0 along the geodesic: D^vdot_vdot X = 0.
inline VectorFieldAlong parallel_transport(const Geodesic& geo, const Eigen::VectorXd& X0,
                                           const OdeOptions& opt = {}) {
  const Metric& m = geo.metric();
  const int n = m.dim();
  OdeRhs rhs = [&m, &geo, n](double t, const Eigen::VectorXd& w, Eigen::VectorXd& dw) {
    const TangentVector tv = geo.at(t);
    const Grid3<double> Gamma = chern_coefficients(m, tv.x, tv.y);
    dw.resize(n);
    for (int mm = 0; mm < n; ++mm) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) acc += w[i] * tv.y[j] * Gamma(mm, i, j);
      dw[mm] = -acc;
    }
  };
  return VectorFieldAlong(integrate_dopri5(rhs, 0.0, X0, geo.tau(), opt), n);
}

/// Parallel g-orthonormal frame along a geodesic, propagated together with
/// the base geodesic as one augmented system so the coefficient evaluations
/// are shared between columns.  Column n is the normalized velocity; the
/// first k columns start inside the supplied tangent block.
class ParallelFrame {
public:
  ParallelFrame(MetricPtr metric, const Eigen::VectorXd& p, const Eigen::VectorXd& v, double tau,
                const Eigen::MatrixXd& tangent_block, const OdeOptions& opt = {})
      : metric_(std::move(metric)), tau_(tau), k_(static_cast<int>(tangent_block.cols())) {
    const Metric& m = *metric_;
    const int n = m.dim();
    m.require_domain(TangentVector(p, v));
    const Eigen::MatrixXd g0 = m.fundamental_matrix(p, v);
    {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g0);
      if (!(es.eigenvalues()(0) > 0.0))
        throw SignatureError("parallel frame: fundamental tensor not positive definite at t=0");
    }
    L0_ = v.dot(g0 * v);
    if (!(L0_ > 1e-12))
      throw SignatureError("parallel frame: L(velocity) must be positive, got " +
                           std::to_string(L0_));

    // Assemble the initial basis: tangent block, completion, then velocity.
    Eigen::MatrixXd E0(n, n);
    const Eigen::VectorXd en = v / std::sqrt(L0_);
    auto gdot = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.dot(g0 * b); };
    std::vector<Eigen::VectorXd> basis;
    for (int a = 0; a < k_; ++a) {
      Eigen::VectorXd b = tangent_block.col(a);
      if (std::abs(gdot(b, v)) > 1e-6 * std::sqrt(std::abs(gdot(b, b)) * L0_))
        throw PreconditionError("parallel frame: tangent block not g-orthogonal to the velocity");
      for (const auto& e : basis) b -= gdot(b, e) * e;
      const double nr = gdot(b, b);
      if (!(nr > 1e-20)) throw SplittingError("parallel frame: tangent block degenerate under g");
      basis.push_back(b / std::sqrt(nr));
    }
    // Complete with the best-conditioned coordinate directions.
    std::vector<Eigen::VectorXd> candidates;
    for (int i = 0; i < n; ++i) candidates.push_back(Eigen::VectorXd::Unit(n, i));
    while (static_cast<int>(basis.size()) < n - 1) {
      double best = -1.0;
      Eigen::VectorXd bestv;
      for (const auto& cand : candidates) {
        Eigen::VectorXd b = cand - gdot(cand, en) * en;
        for (const auto& e : basis) b -= gdot(b, e) * e;
        const double nr = gdot(b, b);
        if (nr > best) {
          best = nr;
          bestv = b;
        }
      }
      if (!(best > 1e-20)) throw SplittingError("parallel frame: basis completion failed");
      basis.push_back(bestv / std::sqrt(best));
    }
    for (int a = 0; a < n - 1; ++a) E0.col(a) = basis[static_cast<std::size_t>(a)];
    E0.col(n - 1) = en;

    // Augmented state [x, y, E columns].
    Eigen::VectorXd u0(2 * n + n * n);
    u0.head(n) = p;
    u0.segment(n, n) = v;
    for (int a = 0; a < n; ++a) u0.segment(2 * n + a * n, n) = E0.col(a);

    OdeRhs rhs = [&m, n](double, const Eigen::VectorXd& u, Eigen::VectorXd& du) {
      const Eigen::VectorXd x = u.head(n), y = u.segment(n, n);
      const Grid3<double> Gamma = chern_coefficients(m, x, y);
      du.resize(u.size());
      du.head(n) = y;
      for (int kk = 0; kk < n; ++kk) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) acc += Gamma(kk, i, j) * y[i] * y[j];
        du[n + kk] = -acc;
      }
      for (int a = 0; a < n; ++a) {
        const Eigen::VectorXd e = u.segment(2 * n + a * n, n);
        for (int mm = 0; mm < n; ++mm) {
          double acc = 0.0;
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) acc += e[i] * y[j] * Gamma(mm, i, j);
          du[2 * n + a * n + mm] = -acc;
        }
      }
    };
    OdePredicate inside = [&m, n](double, const Eigen::VectorXd& u) {
      return m.in_domain(u.head(n), u.segment(n, n));
    };
    sol_ = integrate_dopri5(rhs, 0.0, u0, tau, opt, &inside);

    // Positive definiteness propagates (Remark A); verify and record the
    // worst orthonormality residual on the integration mesh.
    gram_residual_ = 0.0;
    for (double t : sol_.mesh()) {
      const Eigen::VectorXd x = position(t), y = velocity(t);
      const Eigen::MatrixXd g = m.fundamental_matrix(x, y);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
      if (!(es.eigenvalues()(0) > 0.0))
        throw SignatureError("parallel frame: fundamental tensor lost positive definiteness at t=" +
                             std::to_string(t));
      const Eigen::MatrixXd gram = frame(t).transpose() * g * frame(t);
      gram_residual_ = std::max(
          gram_residual_, (gram - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff());
    }
  }

  const Metric& metric() const { return *metric_; }
  const MetricPtr& metric_ptr() const { return metric_; }
  int dim() const { return metric_->dim(); }
  int k() const { return k_; }
  double tau() const { return tau_; }
  double L0() const { return L0_; }
  double gram_residual() const { return gram_residual_; }
  const std::vector<double>& mesh() const { return sol_.mesh(); }

  Eigen::VectorXd position(double t) const { return sol_(t).head(dim()); }
  Eigen::VectorXd velocity(double t) const { return sol_(t).segment(dim(), dim()); }
  Eigen::MatrixXd frame(double t) const {
    const int n = dim();
    const Eigen::VectorXd u = sol_(t);
    Eigen::MatrixXd E(n, n);
    for (int a = 0; a < n; ++a) E.col(a) = u.segment(2 * n + a * n, n);
    return E;
  }

  /// Frame coordinates of an ambient vector at time t (g-orthonormal frame,
  /// so coordinates are g-pairings with the columns).
  Eigen::VectorXd coordinates(double t, const Eigen::VectorXd& w) const {
    const Eigen::MatrixXd g = metric_->fundamental_matrix(position(t), velocity(t));
    return frame(t).transpose() * g * w;
  }
  Eigen::VectorXd ambient(double t, const Eigen::VectorXd& coords) const {
    return frame(t) * coords;
  }

private:
  MetricPtr metric_;
  double tau_;
  int k_;
  double L0_ = 0.0;
  double gram_residual_ = 0.0;
  OdeSolution sol_;
};

inline ParallelFrame parallel_frame(const Geodesic& geo, const Eigen::MatrixXd& tangent_block,
                                    const OdeOptions& opt = {}) {
  return ParallelFrame(geo.metric_ptr(), geo.position(0.0), geo.velocity(0.0), geo.tau(),
                       tangent_block, opt);
}
inline ParallelFrame parallel_frame(const Geodesic& geo, const OdeOptions& opt = {}) {
  return parallel_frame(geo, Eigen::MatrixXd(geo.metric().dim(), 0), opt);
}

/// Dense solution of the reduced Jacobi equation vddot + r_t v = 0 along a
/// frame, with the curvature matrix evaluated exactly at every stage.
class ReducedJacobiField {
public:
  ReducedJacobiField(const ParallelFrame& fr, const Eigen::VectorXd& v0, const Eigen::VectorXd& dv0,
                     const OdeOptions& opt = {})
      : n_(fr.dim()) {
    const Metric& m = fr.metric();
    const int n = n_;
    OdeRhs rhs = [&m, &fr, n](double t, const Eigen::VectorXd& u, Eigen::VectorXd& du) {
      const Eigen::MatrixXd r =
          reduced_curvature_matrix(m, fr.position(t), fr.velocity(t), fr.frame(t));
      du.resize(2 * n);
      du.head(n) = u.tail(n);
      du.tail(n) = -r * u.head(n);
    };
    Eigen::VectorXd u0(2 * n);
    u0 << v0, dv0;
    sol_ = integrate_dopri5(rhs, 0.0, u0, fr.tau(), opt);
  }

  Eigen::VectorXd value(double t) const { return sol_(t).head(n_); }
  Eigen::VectorXd derivative(double t) const { return sol_(t).tail(n_); }

private:
  int n_;
  OdeSolution sol_;
};

/// exp_p(v): endpoint of the unit-time geodesic with initial velocity v.
inline Eigen::VectorXd exp_map(MetricPtr m, const Eigen::VectorXd& p, const Eigen::VectorXd& v,
                               const OdeOptions& opt = {}) {
  return Geodesic(std::move(m), p, v, 1.0, opt).position(1.0);
}

/// D exp_p(v)[w] = J(1) for the Jacobi field with J(0)=0, DJ(0)=w.
/// Requires g positive definite along the geodesic (the frame reduction).
inline Eigen::VectorXd exp_differential(MetricPtr m, const Eigen::VectorXd& p,
                                        const Eigen::VectorXd& v, const Eigen::VectorXd& w,
                                        const OdeOptions& opt = {}) {
  ParallelFrame fr(std::move(m), p, v, 1.0, Eigen::MatrixXd(static_cast<int>(p.size()), 0), opt);
  ReducedJacobiField jf(fr, Eigen::VectorXd::Zero(fr.dim()), fr.coordinates(0.0, w), opt);
  return fr.ambient(1.0, jf.value(1.0));
}

/// g_vdot-orthogonal split of a vector at time t along a non-lightlike
/// geodesic: tan = (g(X, vdot)/g(vdot, vdot)) vdot, nor = X - tan.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> tangent_normal_split(const Geodesic& geo,
                                                                        double t,
                                                                        const Eigen::VectorXd& X) {
  if (std::abs(geo.L0()) < 1e-12)
    throw PreconditionError("tangent/normal split undefined on a lightlike geodesic");
  const TangentVector tv = geo.at(t);
  const Eigen::MatrixXd g = geo.metric().fundamental_matrix(tv.x, tv.y);
  const double a = tv.y.dot(g * X) / tv.y.dot(g * tv.y);
  Eigen::VectorXd tan = a * tv.y;
  return {tan, X - tan};
}

/// Damped-Newton shooting for the two-point problem gamma(0)=p,
/// gamma(tau)=q; the Jacobian is taken by central differences on the
/// initial velocity.
inline Geodesic geodesic_bvp(MetricPtr m, const Eigen::VectorXd& p, const Eigen::VectorXd& q,
                             double tau, const Eigen::VectorXd& v_guess, const OdeOptions& opt = {},
                             int max_iter = 60) {
  const int n = static_cast<int>(p.size());
  Eigen::VectorXd v = v_guess;

  auto endpoint = [&](const Eigen::VectorXd& vel) -> Eigen::VectorXd {
    return Geodesic(m, p, vel, tau, opt).position(tau);
  };

  Eigen::VectorXd F = endpoint(v) - q;
  for (int it = 0; it < max_iter; ++it) {
    if (F.norm() <= 1e-9) return Geodesic(m, p, v, tau, opt);
    Eigen::MatrixXd J(n, n);
    const double step = 1e-6 * std::max(1.0, v.norm());
    try {
      for (int c = 0; c < n; ++c) {
        Eigen::VectorXd dv = Eigen::VectorXd::Zero(n);
        dv[c] = step;
        J.col(c) = (endpoint(v + dv) - endpoint(v - dv)) / (2.0 * step);
      }
    } catch (const DomainError&) {
      throw ConvergenceError(
          "geodesic shooting: Jacobian probe left the conic domain at |F|=" +
          std::to_string(F.norm()));
    }
    const Eigen::VectorXd delta = J.fullPivLu().solve(-F);
    bool accepted = false;
    for (double lambda = 1.0; lambda >= 1.0 / 1024.0; lambda *= 0.5) {
      const Eigen::VectorXd trial = v + lambda * delta;
      try {
        const Eigen::VectorXd Ft = endpoint(trial) - q;
        if (Ft.norm() < (1.0 - 0.25 * lambda) * F.norm() || Ft.norm() <= 1e-9) {
          v = trial;
          F = Ft;
          accepted = true;
          break;
        }
      } catch (const DomainError&) {
        // trial velocity drives the geodesic out of the cone; shrink
      } catch (const IntegrationError&) {
      }
    }
    if (!accepted)
      throw ConvergenceError("geodesic shooting: line search stalled at |F|=" +
                             std::to_string(F.norm()));
  }
  if (F.norm() <= 1e-9) return Geodesic(m, p, v, tau, opt);
  throw ConvergenceError("geodesic shooting: no convergence, |F|=" + std::to_string(F.norm()));
}

}  // namespace finsler
