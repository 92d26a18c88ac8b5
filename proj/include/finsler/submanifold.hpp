#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "finsler/connection.hpp"
#include "finsler/errors.hpp"
#include "finsler/expression.hpp"
#include "finsler/geodesic.hpp"
#include "finsler/jet.hpp"
#include "finsler/metric.hpp"

namespace finsler {

/// Embedded endpoint submanifold: a jet-capable parametrization from k
/// parameters into the chart, 0 <= k < n (k = 0 is a point).
class Submanifold {
public:
  enum class Family { Point, Line, Circle, Sphere, Graph };

  static Submanifold point(Eigen::VectorXd p) {
    Submanifold s(Family::Point, static_cast<int>(p.size()), 0);
    s.p0_ = std::move(p);
    return s;
  }

  static Submanifold line(Eigen::VectorXd p0, Eigen::VectorXd dir) {
    Submanifold s(Family::Line, static_cast<int>(p0.size()), 1);
    if (dir.size() != p0.size() || dir.norm() == 0.0)
      throw PreconditionError("line submanifold: bad direction");
    s.p0_ = std::move(p0);
    s.dir_ = std::move(dir);
    return s;
  }

  /// Circle of radius rho in the (x1, x2) coordinate plane about `center`.
  static Submanifold circle(Eigen::VectorXd center, double rho) {
    Submanifold s(Family::Circle, static_cast<int>(center.size()), 1);
    if (center.size() < 2) throw PreconditionError("circle submanifold: ambient dim >= 2");
    if (!(rho > 0.0)) throw PreconditionError("circle submanifold: radius must be positive");
    s.p0_ = std::move(center);
    s.rho_ = rho;
    return s;
  }

  /// Sphere of radius rho about `center`; k = n-1 (n = 2 falls back to the
  /// circle parametrization, n = 3 uses polar/azimuthal angles).
  static Submanifold sphere(Eigen::VectorXd center, double rho) {
    const int n = static_cast<int>(center.size());
    if (n == 2) return circle(std::move(center), rho);
    if (n != 3) throw PreconditionError("sphere submanifold implemented for ambient dim 2 and 3");
    Submanifold s(Family::Sphere, n, 2);
    if (!(rho > 0.0)) throw PreconditionError("sphere submanifold: radius must be positive");
    s.p0_ = std::move(center);
    s.rho_ = rho;
    return s;
  }

  /// Fully parametric embedding: n component expressions in u1..uk.
  static Submanifold graph(int n, int k, const std::vector<std::string>& components) {
    Submanifold s(Family::Graph, n, k);
    if (static_cast<int>(components.size()) != n)
      throw PreconditionError("graph submanifold: need one expression per ambient coordinate");
    if (k < 1 || k >= n) throw PreconditionError("graph submanifold: need 1 <= k < n");
    std::vector<std::string> vars;
    for (int i = 1; i <= k; ++i) vars.push_back("u" + std::to_string(i));
    for (const auto& src : components) s.comps_.push_back(Expr::parse(src, vars));
    return s;
  }

  int ambient_dim() const { return n_; }
  int k() const { return k_; }
  Family family() const { return family_; }

  template <class S>
  std::vector<S> embed(const std::vector<S>& u) const {
    using std::cos;
    using std::sin;
    if (static_cast<int>(u.size()) != k_)
      throw PreconditionError("submanifold: wrong parameter count");
    std::vector<S> out(static_cast<std::size_t>(n_), S(0.0));
    switch (family_) {
      case Family::Point:
        for (int i = 0; i < n_; ++i) out[i] = S(p0_[i]);
        return out;
      case Family::Line:
        for (int i = 0; i < n_; ++i) out[i] = S(p0_[i]) + u[0] * dir_[i];
        return out;
      case Family::Circle: {
        for (int i = 0; i < n_; ++i) out[i] = S(p0_[i]);
        out[0] += rho_ * cos(u[0]);
        out[1] += rho_ * sin(u[0]);
        return out;
      }
      case Family::Sphere: {
        for (int i = 0; i < n_; ++i) out[i] = S(p0_[i]);
        out[0] += rho_ * sin(u[0]) * cos(u[1]);
        out[1] += rho_ * sin(u[0]) * sin(u[1]);
        out[2] += rho_ * cos(u[0]);
        return out;
      }
      case Family::Graph:
        for (int i = 0; i < n_; ++i) out[i] = comps_[static_cast<std::size_t>(i)].eval(u);
        return out;
    }
    throw Error("submanifold: corrupt family");
  }

  Eigen::VectorXd embed(const Eigen::VectorXd& u) const {
    std::vector<double> uu(u.data(), u.data() + u.size());
    const std::vector<double> out = embed(uu);
    return Eigen::Map<const Eigen::VectorXd>(out.data(), n_);
  }

  /// Columns d psi / d u^a; errors when the Jacobian is rank deficient.
  Eigen::MatrixXd tangent_basis(const Eigen::VectorXd& u) const {
    Eigen::MatrixXd B(n_, k_);
    for (int a = 0; a < k_; ++a) {
      std::vector<Jet1> uu(static_cast<std::size_t>(k_));
      for (int b = 0; b < k_; ++b) uu[b] = Jet1(u[b]);
      uu[a] = Jet1::variable(u[a], 0);
      const std::vector<Jet1> out = embed(uu);
      for (int i = 0; i < n_; ++i) B(i, a) = out[i].coeff(1u);
    }
    if (k_ > 0) {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(B);
      if (!(svd.singularValues()(k_ - 1) > 1e-10 * std::max(1.0, svd.singularValues()(0))))
        throw PreconditionError("submanifold: embedding Jacobian rank deficient");
    }
    return B;
  }

  /// Second parameter derivatives d^2 psi^i / d u^a d u^b.
  Grid3<double> second_derivative(const Eigen::VectorXd& u) const {
    Grid3<double> H(n_, k_, k_);
    for (int a = 0; a < k_; ++a)
      for (int b = a; b < k_; ++b) {
        std::vector<Jet2> uu(static_cast<std::size_t>(k_));
        for (int c = 0; c < k_; ++c) uu[c] = Jet2(u[c]);
        uu[a].set_coeff(1u, uu[a].coeff(1u) + 1.0);
        uu[b].set_coeff(2u, uu[b].coeff(2u) + 1.0);
        const std::vector<Jet2> out = embed(uu);
        for (int i = 0; i < n_; ++i) {
          H(i, a, b) = out[i].coeff(3u);
          H(i, b, a) = out[i].coeff(3u);
        }
      }
    return H;
  }

private:
  Submanifold(Family f, int n, int k) : family_(f), n_(n), k_(k) {
    if (n < 1 || k < 0 || k >= n)
      throw PreconditionError("submanifold: need ambient dim n >= 1 and 0 <= k < n");
  }

  Family family_;
  int n_, k_;
  Eigen::VectorXd p0_, dir_;
  double rho_ = 0.0;
  std::vector<Expr> comps_;
};

/// g_v-orthogonal splitting T_pM = T_pP (+) (T_pP)^perp_v.
struct OrthogonalSplitting {
  Eigen::MatrixXd tangent_basis;     // n x k
  Eigen::MatrixXd complement_basis;  // n x (n-k)
  Eigen::MatrixXd tanP, norP;        // n x n projections
};

inline OrthogonalSplitting splitting(const Metric& m, const Submanifold& P,
                                     const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  const int n = m.dim(), k = P.k();
  const Eigen::VectorXd p = P.embed(u);
  m.require_domain(TangentVector(p, v));
  OrthogonalSplitting out;
  out.tangent_basis = P.tangent_basis(u);
  const Eigen::MatrixXd G = m.fundamental_matrix(p, v);
  if (k == 0) {
    out.tanP = Eigen::MatrixXd::Zero(n, n);
    out.norP = Eigen::MatrixXd::Identity(n, n);
    out.complement_basis = Eigen::MatrixXd::Identity(n, n);
    return out;
  }
  const Eigen::MatrixXd W = out.tangent_basis.transpose() * G * out.tangent_basis;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(W, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double rc = svd.singularValues()(k - 1) / svd.singularValues()(0);
  if (!(rc > Metric::kRcondThreshold))
    throw SplittingError("splitting: g restricted to T_pP is degenerate (rcond " +
                         std::to_string(rc) + ")");
  const Eigen::MatrixXd Winv = svd.solve(Eigen::MatrixXd::Identity(k, k));
  out.tanP = out.tangent_basis * Winv * out.tangent_basis.transpose() * G;
  out.norP = Eigen::MatrixXd::Identity(n, n) - out.tanP;
  // Kernel of B^T G spans the complement.
  Eigen::JacobiSVD<Eigen::MatrixXd> ker(out.tangent_basis.transpose() * G,
                                        Eigen::ComputeFullV);
  out.complement_basis = ker.matrixV().rightCols(n - k);
  return out;
}

/// Shape data of P in the normal direction v: the second fundamental form
/// values S^P(b_a, b_b), the pairing matrix [g(S-tilde b_a, b_b)] and the
/// operator coordinates of S-tilde in the parameter basis, recovered from
/// g(S^P(u, w), v) = -g(S-tilde u, w).
struct ShapeData {
  Eigen::MatrixXd tangent_basis;  // n x k
  Grid3<double> second_form;      // (i, a, b): S^P(b_a, b_b) components
  Eigen::MatrixXd pairing;        // k x k: g(S-tilde b_a, b_b)
  Eigen::MatrixXd S_tilde;        // k x k operator in the parameter basis
};

inline ShapeData shape_operator(const Metric& m, const Submanifold& P, const Eigen::VectorXd& u,
                                const Eigen::VectorXd& v) {
  const int n = m.dim(), k = P.k();
  const Eigen::VectorXd p = P.embed(u);
  const OrthogonalSplitting sp = splitting(m, P, u, v);
  const Eigen::MatrixXd& B = sp.tangent_basis;
  const Eigen::MatrixXd G = m.fundamental_matrix(p, v);

  ShapeData out;
  out.tangent_basis = B;
  out.second_form = Grid3<double>(n, k, k);
  out.pairing = Eigen::MatrixXd::Zero(k, k);
  out.S_tilde = Eigen::MatrixXd::Zero(k, k);
  if (k == 0) return out;

  const double vnorm = std::sqrt(std::abs(v.dot(G * v)));
  for (int a = 0; a < k; ++a) {
    const double ba = std::sqrt(std::abs(B.col(a).dot(G * B.col(a))));
    if (std::abs(v.dot(G * B.col(a))) > 1e-8 * std::max(1.0, vnorm * ba))
      throw PreconditionError("shape operator: direction vector is not g-normal to P");
  }

  const Grid3<double> H = P.second_derivative(u);
  const Grid3<double> Gamma = chern_coefficients(m, p, v);
  Eigen::MatrixXd T(k, k);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) {
      Eigen::VectorXd w(n);
      for (int mm = 0; mm < n; ++mm) {
        double acc = H(mm, a, b);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) acc += Gamma(mm, i, j) * B(i, b) * B(j, a);
        w[mm] = acc;
      }
      const Eigen::VectorXd s = sp.norP * w;
      for (int mm = 0; mm < n; ++mm) out.second_form(mm, a, b) = s[mm];
      T(a, b) = s.dot(G * v);
    }
  const Eigen::MatrixXd W = B.transpose() * G * B;
  out.S_tilde = -W.partialPivLu().solve(T);
  out.pairing = -T;
  return out;
}

/// exp^{LN}(v) for v in the normal cone of P: endpoint of the unit-time
/// geodesic from psi(u) with velocity v.
inline Eigen::VectorXd normal_exp(MetricPtr m, const Submanifold& P, const Eigen::VectorXd& u,
                                  const Eigen::VectorXd& v, const OdeOptions& opt = {}) {
  const Eigen::VectorXd p = P.embed(u);
  shape_operator(*m, P, u, v);  // validates normality and the splitting
  return Geodesic(std::move(m), p, v, 1.0, opt).position(1.0);
}

/// D exp^{LN}(v)[(dx, dy)] = J(1) for the P-Jacobi field with J(0) = dx and
/// DJ(0) = dy + Gamma(v)[v, dx], the chart reading of the variation.
inline Eigen::VectorXd normal_exp_differential(MetricPtr m, const Submanifold& P,
                                               const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                                               const Eigen::VectorXd& dx,
                                               const Eigen::VectorXd& dy,
                                               const OdeOptions& opt = {}) {
  const int n = m->dim();
  const Eigen::VectorXd p = P.embed(u);
  {
    const Eigen::MatrixXd G = m->fundamental_matrix(p, v);
    const Eigen::MatrixXd B = P.tangent_basis(u);
    const double vn = std::sqrt(std::abs(v.dot(G * v)));
    for (int a = 0; a < P.k(); ++a)
      if (std::abs(v.dot(G * B.col(a))) > 1e-8 * std::max(1.0, vn * B.col(a).norm()))
        throw PreconditionError("normal exp differential: v is not in the normal cone of P");
  }
  const Grid3<double> Gamma = chern_coefficients(*m, p, v);
  Eigen::VectorXd DJ0 = dy;
  for (int mm = 0; mm < n; ++mm) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) acc += Gamma(mm, i, j) * v[i] * dx[j];
    DJ0[mm] += acc;
  }
  ParallelFrame fr(std::move(m), p, v, 1.0, Eigen::MatrixXd(n, 0), opt);
  ReducedJacobiField jf(fr, fr.coordinates(0.0, dx), fr.coordinates(0.0, DJ0), opt);
  return fr.ambient(1.0, jf.value(1.0));
}

/// Basis of the tangent space of TP^perp at v, as (dx, dy) chart pairs.
/// The normal-cone constraints c_a(u, z) = g_z(z, d_a psi(u)) are
/// differentiated exactly with jets and the null space of the constraint
/// Jacobian is returned.
inline std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> normal_bundle_tangent_basis(
    const Metric& m, const Submanifold& P, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  const int n = m.dim(), k = P.k();
  const Eigen::MatrixXd B = P.tangent_basis(u);

  // c_a(u, z) = 1/2 sum_i dL/dy_i(psi(u), z) * d_a psi^i(u).
  // Columns of the Jacobian: the k parameter directions then the n fiber
  // directions.  gen0 drives d_a psi, gen2 the dL/dy_i fiber derivative,
  // gen1 the differentiation direction.
  Eigen::MatrixXd Jc(k, k + n);
  for (int d = 0; d < k + n; ++d) {
    for (int a = 0; a < k; ++a) {
      std::vector<Jet3> uu(static_cast<std::size_t>(k));
      for (int b = 0; b < k; ++b) uu[b] = Jet3(u[b]);
      uu[a].set_coeff(1u, uu[a].coeff(1u) + 1.0);  // gen0: d/du_a inside psi
      if (d < k) uu[d].set_coeff(2u, uu[d].coeff(2u) + 1.0);  // gen1: input dir
      const std::vector<Jet3> psi = P.embed(uu);
      const std::vector<Jet3>& x = psi;  // gen0 content cannot reach the gen1 coefficient
      Jet3 acc(0.0);
      for (int i = 0; i < n; ++i) {
        std::vector<Jet3> z(static_cast<std::size_t>(n));
        for (int jj = 0; jj < n; ++jj) z[jj] = Jet3(v[jj]);
        if (d >= k) z[d - k].set_coeff(2u, z[d - k].coeff(2u) + 1.0);  // gen1: fiber dir
        z[i].set_coeff(4u, z[i].coeff(4u) + 1.0);                     // gen2: dL/dy_i
        const Jet3 dLdyi = m.eval(x, z).extract(4u);
        acc += 0.5 * (psi[i].extract(1u) * dLdyi);
      }
      Jc(a, d) = acc.coeff(2u);
    }
  }

  std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> out;
  if (k == 0) {
    for (int j = 0; j < n; ++j)
      out.emplace_back(Eigen::VectorXd::Zero(n), Eigen::VectorXd::Unit(n, j));
    return out;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Jc, Eigen::ComputeFullV);
  const Eigen::MatrixXd null_basis = svd.matrixV().rightCols(n);
  for (int c = 0; c < n; ++c) {
    const Eigen::VectorXd du = null_basis.col(c).head(k);
    const Eigen::VectorXd dz = null_basis.col(c).tail(n);
    out.emplace_back(B * du, dz);
  }
  return out;
}

/// Newton projection of an approximate normal vector onto the normal cone:
/// adjusts tangential components until g_z(z, T_pP) = 0.
inline Eigen::VectorXd project_to_normal_cone(const Metric& m, const Submanifold& P,
                                              const Eigen::VectorXd& u, const Eigen::VectorXd& w,
                                              int max_iter = 50) {
  const int k = P.k();
  if (k == 0) return w;
  const Eigen::VectorXd p = P.embed(u);
  const Eigen::MatrixXd B = P.tangent_basis(u);

  auto constraint = [&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
    const Eigen::MatrixXd G = m.fundamental_matrix(p, z);
    return B.transpose() * G * z;
  };

  Eigen::VectorXd a = Eigen::VectorXd::Zero(k);
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd z = w + B * a;
    if (!m.in_domain(p, z))
      throw DomainError("normal cone projection: iterate left the conic domain");
    const Eigen::VectorXd c = constraint(z);
    if (c.norm() <= 1e-12 * std::max(1.0, z.norm())) return z;
    Eigen::MatrixXd J(k, k);
    const double step = 1e-6 * std::max(1.0, a.norm());
    for (int col = 0; col < k; ++col) {
      Eigen::VectorXd da = Eigen::VectorXd::Zero(k);
      da[col] = step;
      J.col(col) = (constraint(w + B * (a + da)) - constraint(w + B * (a - da))) / (2.0 * step);
    }
    a -= J.fullPivLu().solve(c);
  }
  throw ConvergenceError("normal cone projection: no convergence");
}

/// Perpendicularity residuals of a geodesic against its endpoint
/// submanifolds, plus chart-coordinate membership errors.
struct OrthogonalityReport {
  double membership_start = 0.0, membership_end = 0.0;
  double residual_start = 0.0, residual_end = 0.0;
};

inline OrthogonalityReport orthogonality_check(const Geodesic& geo, const Submanifold& P,
                                               const Eigen::VectorXd& uP,
                                               const Submanifold* Q = nullptr,
                                               const Eigen::VectorXd* uQ = nullptr) {
  const Metric& m = geo.metric();
  OrthogonalityReport rep;
  rep.membership_start = (geo.position(0.0) - P.embed(uP)).norm();
  if (rep.membership_start > 1e-8)
    throw PreconditionError("orthogonality: geodesic start not on P (distance " +
                            std::to_string(rep.membership_start) + ")");
  {
    const TangentVector tv = geo.at(0.0);
    const Eigen::MatrixXd G = m.fundamental_matrix(tv.x, tv.y);
    const Eigen::MatrixXd B = P.tangent_basis(uP);
    for (int a = 0; a < P.k(); ++a)
      rep.residual_start = std::max(rep.residual_start, std::abs(tv.y.dot(G * B.col(a))));
  }
  if (Q && uQ) {
    rep.membership_end = (geo.position(geo.tau()) - Q->embed(*uQ)).norm();
    if (rep.membership_end > 1e-8)
      throw PreconditionError("orthogonality: geodesic end not on Q (distance " +
                              std::to_string(rep.membership_end) + ")");
    const TangentVector tv = geo.at(geo.tau());
    const Eigen::MatrixXd G = m.fundamental_matrix(tv.x, tv.y);
    const Eigen::MatrixXd B = Q->tangent_basis(*uQ);
    for (int a = 0; a < Q->k(); ++a)
      rep.residual_end = std::max(rep.residual_end, std::abs(tv.y.dot(G * B.col(a))));
  }
  return rep;
}

}  // namespace finsler
