#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "finsler/connection.hpp"
#include "finsler/errors.hpp"
#include "finsler/geodesic.hpp"
#include "finsler/metric.hpp"
#include "finsler/submanifold.hpp"
#include "finsler/util.hpp"

namespace finsler {

struct ReduceOptions {
  OdeOptions ode;
  int curvature_samples = 1025;  // spline cache resolution for r_t
  double rank_tol = 1e-7;        // relative singular-value threshold
  int scan_grid = 2048;          // focal/conjugate scan resolution
  int partition_scan_grid = 512;
};

/// Hermann's reduced data along the geodesic: a parallel orthonormal frame,
/// the curvature matrix function r_t with r^{ij} = -g(R(vdot, E_i) vdot,
/// E_j), and the boundary form Q on R^k with Q_ij = -g(S-tilde e_i, e_j).
class ReducedJacobiSystem {
public:
  ReducedJacobiSystem(std::shared_ptr<ParallelFrame> frame, Eigen::MatrixXd Q_form,
                      const ReduceOptions& opts)
      : frame_(std::move(frame)), Q_(std::move(Q_form)), opts_(opts) {
    const int n = frame_->dim();
    const int samples = std::max(9, opts_.curvature_samples);
    std::vector<Eigen::VectorXd> flat;
    flat.reserve(static_cast<std::size_t>(samples));
    r_asym_ = 0.0;
    radial_residual_ = 0.0;
    for (int i = 0; i < samples; ++i) {
      const double t = frame_->tau() * i / (samples - 1);
      double asym = 0.0;
      const Eigen::MatrixXd r = reduced_curvature_matrix(
          frame_->metric(), frame_->position(t), frame_->velocity(t), frame_->frame(t), &asym);
      r_asym_ = std::max(r_asym_, asym);
      for (int a = 0; a < n; ++a) {
        radial_residual_ = std::max(radial_residual_, std::abs(r(a, n - 1)));
        radial_residual_ = std::max(radial_residual_, std::abs(r(n - 1, a)));
      }
      flat.push_back(Eigen::Map<const Eigen::VectorXd>(r.data(), n * n));
    }
    spline_ = CubicSpline(0.0, frame_->tau(), std::move(flat));
  }

  int dim() const { return frame_->dim(); }
  int k() const { return frame_->k(); }
  double tau() const { return frame_->tau(); }
  double L0() const { return frame_->L0(); }
  const ParallelFrame& frame() const { return *frame_; }
  const Eigen::MatrixXd& Q_form() const { return Q_; }
  const ReduceOptions& options() const { return opts_; }
  double curvature_asymmetry() const { return r_asym_; }
  double radial_residual() const { return radial_residual_; }

  /// r_t from the spline cache.
  Eigen::MatrixXd R_at(double t) const {
    const int n = dim();
    const Eigen::VectorXd f = spline_(t);
    return Eigen::Map<const Eigen::MatrixXd>(f.data(), n, n);
  }

  /// r_t recomputed from scratch (slow path, used to validate the cache).
  Eigen::MatrixXd R_exact(double t) const {
    return reduced_curvature_matrix(frame_->metric(), frame_->position(t), frame_->velocity(t),
                                    frame_->frame(t));
  }

private:
  std::shared_ptr<ParallelFrame> frame_;
  Eigen::MatrixXd Q_;
  ReduceOptions opts_;
  CubicSpline spline_;
  double r_asym_ = 0.0;
  double radial_residual_ = 0.0;
};

/// Builds the reduced system for a geodesic leaving P perpendicularly.
/// Passing no submanifold treats the start as a point (k = 0).
inline ReducedJacobiSystem reduce(const Geodesic& geo, const Submanifold* P = nullptr,
                                  const Eigen::VectorXd* uP = nullptr,
                                  const ReduceOptions& opts = {}) {
  const Metric& m = geo.metric();
  const int n = m.dim();
  Eigen::MatrixXd tangent_block(n, 0);
  Eigen::MatrixXd Q;
  if (P && P->k() > 0) {
    if (!uP) throw PreconditionError("reduce: submanifold parameters missing");
    const OrthogonalityReport rep = orthogonality_check(geo, *P, *uP);
    if (rep.residual_start > 1e-8)
      throw PreconditionError("reduce: geodesic does not leave P perpendicularly (residual " +
                              std::to_string(rep.residual_start) + ")");
    tangent_block = P->tangent_basis(*uP);
  }
  auto frame = std::make_shared<ParallelFrame>(geo.metric_ptr(), geo.position(0.0),
                                               geo.velocity(0.0), geo.tau(), tangent_block,
                                               opts.ode);
  const int k = frame->k();
  if (P && P->k() > 0) {
    const ShapeData sd = shape_operator(m, *P, *uP, geo.velocity(0.0));
    // Frame tangent columns expressed in the parameter basis.
    const Eigen::MatrixXd B = sd.tangent_basis;
    const Eigen::MatrixXd Etan = frame->frame(0.0).leftCols(k);
    const Eigen::MatrixXd C =
        (B.transpose() * B).ldlt().solve(B.transpose() * Etan);  // B C = Etan
    Eigen::MatrixXd Qf = -(C.transpose() * sd.pairing * C);
    Q = 0.5 * (Qf + Qf.transpose());
  } else {
    Q = Eigen::MatrixXd::Zero(0, 0);
  }
  return ReducedJacobiSystem(std::move(frame), std::move(Q), opts);
}

/// Dense solution matrix of vddot + r_t v = 0 for a set of initial columns
/// on [a, b], with the columns that vanish at t = a tracked so scans can
/// work with the division-normalized matrix.
class JacobiSolutionMatrix {
public:
  JacobiSolutionMatrix(const ReducedJacobiSystem& sys, double a, double b, Eigen::MatrixXd V0,
                       Eigen::MatrixXd DV0)
      : n_(sys.dim()), m_(static_cast<int>(V0.cols())), a_(a), b_(b) {
    if (V0.rows() != n_ || DV0.rows() != n_ || DV0.cols() != m_)
      throw PreconditionError("jacobi columns: inconsistent initial data");
    zero_at_a_.resize(static_cast<std::size_t>(m_));
    for (int c = 0; c < m_; ++c) zero_at_a_[static_cast<std::size_t>(c)] = V0.col(c).norm() == 0.0;
    OdeRhs rhs = [&sys, this](double t, const Eigen::VectorXd& u, Eigen::VectorXd& du) {
      const Eigen::MatrixXd r = sys.R_at(t);
      const Eigen::Map<const Eigen::MatrixXd> V(u.data(), n_, m_);
      const Eigen::Map<const Eigen::MatrixXd> DV(u.data() + n_ * m_, n_, m_);
      du.resize(u.size());
      Eigen::Map<Eigen::MatrixXd>(du.data(), n_, m_) = DV;
      Eigen::Map<Eigen::MatrixXd>(du.data() + n_ * m_, n_, m_) = -r * V;
    };
    Eigen::VectorXd u0(2 * n_ * m_);
    Eigen::Map<Eigen::MatrixXd>(u0.data(), n_, m_) = V0;
    Eigen::Map<Eigen::MatrixXd>(u0.data() + n_ * m_, n_, m_) = DV0;
    if (!(b > a)) throw PreconditionError("jacobi columns: need b > a");
    sol_ = integrate_dopri5(rhs, a, u0, b, sys.options().ode);
  }

  int cols() const { return m_; }
  int rows() const { return n_; }
  double a() const { return a_; }
  double b() const { return b_; }

  Eigen::MatrixXd value(double t) const {
    const Eigen::VectorXd u = sol_(t);
    return Eigen::Map<const Eigen::MatrixXd>(u.data(), n_, m_);
  }
  Eigen::MatrixXd derivative(double t) const {
    const Eigen::VectorXd u = sol_(t);
    return Eigen::Map<const Eigen::MatrixXd>(u.data() + n_ * m_, n_, m_);
  }

  /// Solution matrix with the zero-initial columns divided by (t - a); the
  /// division removes the trivial degeneracy at the left end while leaving
  /// ranks at t > a unchanged.
  Eigen::MatrixXd normalized(double t) const {
    Eigen::MatrixXd V = value(t);
    const double s = t - a_;
    for (int c = 0; c < m_; ++c)
      if (zero_at_a_[static_cast<std::size_t>(c)]) V.col(c) /= s;
    return V;
  }

private:
  int n_, m_;
  double a_, b_;
  std::vector<bool> zero_at_a_;
  OdeSolution sol_;
};

/// Single reduced Jacobi field from initial data (dense in t).
inline JacobiSolutionMatrix jacobi_ivp(const ReducedJacobiSystem& sys, const Eigen::VectorXd& v0,
                                       const Eigen::VectorXd& dv0) {
  return JacobiSolutionMatrix(sys, 0.0, sys.tau(), v0, dv0);
}

/// The P-Jacobi basis of Lemma-style boundary data: columns 1..k start at
/// the tangent frame vectors with derivative S-tilde e_i (equivalently
/// -Q e_i), columns k+1..n-1 start at zero with unit normal derivatives,
/// and the last column is t sqrt(L0) e_n.
inline JacobiSolutionMatrix p_jacobi_basis(const ReducedJacobiSystem& sys) {
  const int n = sys.dim(), k = sys.k();
  Eigen::MatrixXd V0 = Eigen::MatrixXd::Zero(n, n), DV0 = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < k; ++i) {
    V0(i, i) = 1.0;
    DV0.col(i).head(k) = -sys.Q_form().col(i);
  }
  for (int i = k; i < n - 1; ++i) DV0(i, i) = 1.0;
  DV0(n - 1, n - 1) = std::sqrt(sys.L0());
  return JacobiSolutionMatrix(sys, 0.0, sys.tau(), V0, DV0);
}

/// A detected focal instant with its multiplicity.  `certain` is false when
/// the smallest singular value sits on the threshold plateau; such points
/// are reported rather than silently dropped.
struct FocalPoint {
  double t = 0.0;
  int multiplicity = 0;
  bool certain = true;
};

namespace detail {

inline double sigma_min(const Eigen::MatrixXd& M) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

/// Scans sigma_min of the normalized solution matrix over (a, b] and
/// refines every strict local minimum and every determinant sign change.
inline std::vector<FocalPoint> scan_degeneracies(const JacobiSolutionMatrix& cols, double rank_tol,
                                                 int grid) {
  const double a = cols.a(), b = cols.b();
  const int N = std::max(grid, 16);
  std::vector<double> ts(static_cast<std::size_t>(N)), smin(static_cast<std::size_t>(N)),
      det(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) {
    const double t = a + (b - a) * (i + 1) / N;
    ts[static_cast<std::size_t>(i)] = t;
    const Eigen::MatrixXd M = cols.normalized(t);
    smin[static_cast<std::size_t>(i)] = sigma_min(M);
    det[static_cast<std::size_t>(i)] = M.determinant();
  }

  auto sigma_at = [&](double t) { return sigma_min(cols.normalized(t)); };

  std::vector<double> candidates;
  // Determinant sign changes: bisection brackets for odd multiplicities.
  for (int i = 0; i + 1 < N; ++i) {
    if (det[i] == 0.0) {
      candidates.push_back(ts[i]);
      continue;
    }
    if (det[i] * det[i + 1] < 0.0) {
      double lo = ts[i], hi = ts[i + 1], flo = det[i];
      for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, b - a); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = cols.normalized(mid).determinant();
        if (fm == 0.0) {
          lo = hi = mid;
          break;
        }
        if (flo * fm < 0.0) hi = mid;
        else {
          lo = mid;
          flo = fm;
        }
      }
      candidates.push_back(0.5 * (lo + hi));
    }
  }
  // Local sigma_min minima: golden-section refinement (catches the even
  // multiplicities the determinant cannot see).
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  auto golden = [&](double lo, double hi) {
    double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
    double fc = sigma_at(c), fd = sigma_at(d);
    while (hi - lo > 1e-8) {
      if (fc < fd) {
        hi = d;
        d = c;
        fd = fc;
        c = hi - gr * (hi - lo);
        fc = sigma_at(c);
      } else {
        lo = c;
        c = d;
        fc = fd;
        d = lo + gr * (hi - lo);
        fd = sigma_at(d);
      }
    }
    return 0.5 * (lo + hi);
  };
  for (int i = 0; i < N; ++i) {
    const double left = (i == 0) ? std::numeric_limits<double>::infinity() : smin[i - 1];
    const double right = (i == N - 1) ? std::numeric_limits<double>::infinity() : smin[i + 1];
    if (smin[i] <= left && smin[i] <= right && (smin[i] < left || smin[i] < right)) {
      const double lo = (i == 0) ? ts[0] : ts[i - 1];
      const double hi = (i == N - 1) ? ts[N - 1] : ts[i + 1];
      candidates.push_back(golden(lo, hi));
    }
  }

  std::sort(candidates.begin(), candidates.end());
  std::vector<FocalPoint> out;
  const double merge_tol = 1e-6 * std::max(1.0, b - a);
  for (double t0 : candidates) {
    if (!out.empty() && std::abs(out.back().t - t0) < merge_tol) continue;
    const Eigen::MatrixXd M = cols.normalized(t0);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    const Eigen::VectorXd s = svd.singularValues();
    const double smax = std::max(s(0), 1e-300);
    int mu = 0, mu_loose = 0;
    for (int i = 0; i < s.size(); ++i) {
      if (s(i) < rank_tol * smax) ++mu;
      if (s(i) < 100.0 * rank_tol * smax) ++mu_loose;
    }
    if (mu > 0) {
      out.push_back({t0, mu, true});
    } else if (mu_loose > 0) {
      out.push_back({t0, mu_loose, false});
    }
  }
  return out;
}

}  // namespace detail

/// P-focal instants on (0, tau] with multiplicities mu = n - rank M(t0).
inline std::vector<FocalPoint> focal_points(const ReducedJacobiSystem& sys,
                                            const JacobiSolutionMatrix& basis) {
  return detail::scan_degeneracies(basis, sys.options().rank_tol, sys.options().scan_grid);
}

/// Instants in (a, b] conjugate to a, from the vanish-at-a column basis.
inline std::vector<FocalPoint> conjugate_points(const ReducedJacobiSystem& sys, double a, double b,
                                                int grid = 0) {
  if (!(a >= 0.0 && b <= sys.tau() + 1e-12 && b > a))
    throw PreconditionError("conjugate scan: need 0 <= a < b <= tau");
  const int n = sys.dim();
  JacobiSolutionMatrix cols(sys, a, b, Eigen::MatrixXd::Zero(n, n),
                            Eigen::MatrixXd::Identity(n, n));
  return detail::scan_degeneracies(cols, sys.options().rank_tol,
                                   grid > 0 ? grid : sys.options().scan_grid);
}

/// Partition 0 = t_0 < ... < t_m = tau with (0, t_1] free of P-focal
/// instants and every piece free of mutually conjugate pairs.  Segments
/// failing the conjugate scan are bisected greedily up to the node cap.
inline std::vector<double> disconjugate_partition(const ReducedJacobiSystem& sys,
                                                  const std::vector<FocalPoint>& focal,
                                                  int max_nodes = 64) {
  const double tau = sys.tau();
  const int grid = sys.options().partition_scan_grid;
  double t1 = tau;
  if (!focal.empty()) t1 = std::min(tau, 0.9 * focal.front().t);
  for (int attempt = 0; attempt < 40; ++attempt) {
    if (conjugate_points(sys, 0.0, t1, grid).empty()) break;
    t1 *= 0.65;
    if (attempt == 39) throw PartitionError("partition: no conjugate-free first segment found");
  }

  std::vector<double> nodes{0.0, t1};
  std::vector<std::pair<double, double>> open;
  if (t1 < tau - 1e-12) open.emplace_back(t1, tau);
  while (!open.empty()) {
    auto [a, b] = open.back();
    open.pop_back();
    if (static_cast<int>(nodes.size()) + static_cast<int>(open.size()) > max_nodes)
      throw PartitionError("partition: node cap exceeded");
    if (conjugate_points(sys, a, b, grid).empty()) {
      nodes.push_back(b);
    } else {
      const double mid = 0.5 * (a + b);
      open.emplace_back(mid, b);
      open.emplace_back(a, mid);
    }
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  if (std::abs(nodes.back() - tau) > 1e-12) nodes.push_back(tau);
  return nodes;
}

/// Sum of multiplicities of the focal instants in the OPEN interval
/// (0, tau); the right endpoint contributes to the nullity instead.
inline int focal_index_sum(const std::vector<FocalPoint>& focal, double tau) {
  int sum = 0;
  for (const auto& f : focal)
    if (f.t < tau - 1e-7) sum += f.multiplicity;
  return sum;
}

}  // namespace finsler
