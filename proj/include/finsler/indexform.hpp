#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <lapacke.h>

#include "finsler/errors.hpp"
#include "finsler/jacobi.hpp"
#include "finsler/submanifold.hpp"

namespace finsler {

/// (index, nullity) of a quadratic form plus the head of its spectrum.
struct IndexResult {
  int index = 0;
  int nullity = 0;
  std::vector<double> head;  // smallest generalized eigenvalues, at most ten
  bool mesh_stable = true;   // set by the refinement wrapper
};

struct AssembleOptions {
  int mesh_N = 256;             // interior nodes
  double eps_neg = 1e-7;        // eigenvalues below -eps_neg count as index
  double eps_null_floor = 1e-7; // null window floor; widened by the h^2 law
  bool restrict_normal = false; // drop the velocity frame coordinate
};

/// Endpoint data of Q expressed in the parallel frame at tau.
struct QEndData {
  Eigen::MatrixXd basis_frame;    // n x kQ, frame coordinates of a T_qQ basis
  Eigen::MatrixXd shape_pairing;  // kQ x kQ, [g(S-tilde^Q b_a, b_b)]
};

inline QEndData q_end_data(const ReducedJacobiSystem& sys, const Submanifold& Q,
                           const Eigen::VectorXd& uQ) {
  const ParallelFrame& fr = sys.frame();
  const Metric& m = fr.metric();
  const double tau = sys.tau();
  const Eigen::VectorXd p = fr.position(tau), v = fr.velocity(tau);
  if ((p - Q.embed(uQ)).norm() > 1e-8)
    throw PreconditionError("Q endpoint: geodesic end not on Q (distance " +
                            std::to_string((p - Q.embed(uQ)).norm()) + ")");
  const Eigen::MatrixXd B = Q.tangent_basis(uQ);
  const Eigen::MatrixXd G = m.fundamental_matrix(p, v);
  for (int a = 0; a < Q.k(); ++a)
    if (std::abs(v.dot(G * B.col(a))) > 1e-8 * std::max(1.0, v.norm() * B.col(a).norm()))
      throw PreconditionError("Q endpoint: geodesic not perpendicular to Q at tau");
  const ShapeData sd = shape_operator(m, Q, uQ, v);
  QEndData out;
  out.basis_frame = Eigen::MatrixXd(sys.dim(), Q.k());
  for (int a = 0; a < Q.k(); ++a) out.basis_frame.col(a) = fr.coordinates(tau, B.col(a));
  out.shape_pairing = 0.5 * (sd.pairing + sd.pairing.transpose());
  return out;
}

/// Symmetric banded matrix in LAPACK 'U' storage.
class BandedSym {
public:
  BandedSym(int dim, int bw) : dim_(dim), bw_(bw), ab_(Eigen::MatrixXd::Zero(bw + 1, dim)) {}
  void add(int i, int j, double v) {
    if (i > j) std::swap(i, j);
    if (j - i > bw_) throw Error("banded assembly: entry outside bandwidth");
    ab_(bw_ + i - j, j) += v;
  }
  double get(int i, int j) const {
    if (i > j) std::swap(i, j);
    if (j - i > bw_) return 0.0;
    return ab_(bw_ + i - j, j);
  }
  int dim() const { return dim_; }
  int bw() const { return bw_; }
  Eigen::MatrixXd& storage() { return ab_; }
  const Eigen::MatrixXd& storage() const { return ab_; }

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dim_, dim_);
    for (int j = 0; j < dim_; ++j)
      for (int i = std::max(0, j - bw_); i <= j; ++i) {
        out(i, j) = get(i, j);
        out(j, i) = get(i, j);
      }
    return out;
  }

private:
  int dim_, bw_;
  Eigen::MatrixXd ab_;
};

/// Piecewise-linear discretization of the second-variation form in frame
/// coordinates: K carries the form, M the L2 mass, plus the endpoint dof
/// bases and the data the spectral thresholds need.
struct DiscretizedForm {
  BandedSym K{0, 0}, M{0, 0};
  int N = 0;          // interior nodes
  double tau = 0.0;
  int n_node = 0;     // dofs per interior node
  int k0 = 0, k1 = 0; // boundary dof counts
  double r_scale = 1.0;  // max |r_t| entry seen during quadrature
  bool restricted = false;
};

namespace detail {

inline DiscretizedForm assemble_form(const ReducedJacobiSystem& sys, const QEndData* qend,
                                     const AssembleOptions& opt) {
  if (opt.mesh_N < 8) throw PreconditionError("assemble: mesh too small (need N >= 8)");
  const int n = sys.dim();
  const int k = sys.k();
  const int nn = opt.restrict_normal ? n - 1 : n;
  if (nn < 1) throw PreconditionError("assemble: nothing left after the normal restriction");
  const int k1 = qend ? static_cast<int>(qend->basis_frame.cols()) : 0;
  const int N = opt.mesh_N;
  const double tau = sys.tau();
  const double h = tau / (N + 1);

  DiscretizedForm form;
  form.N = N;
  form.tau = tau;
  form.n_node = nn;
  form.k0 = k;
  form.k1 = k1;
  form.restricted = opt.restrict_normal;

  // Node dof bases mapping dof coefficients to (possibly restricted) frame
  // coordinates.  Node 0 injects into the first k coordinates, interior
  // nodes are the identity, node N+1 uses the Q basis.
  Eigen::MatrixXd D0 = Eigen::MatrixXd::Zero(nn, k);
  for (int a = 0; a < k; ++a) D0(a, a) = 1.0;
  Eigen::MatrixXd Dend(nn, k1);
  if (qend) {
    if (opt.restrict_normal) {
      for (int a = 0; a < k1; ++a) {
        if (std::abs(qend->basis_frame(n - 1, a)) > 1e-6)
          throw HypothesisError("assemble: T_qQ not orthogonal to the velocity frame direction");
        Dend.col(a) = qend->basis_frame.col(a).head(nn);
      }
    } else {
      Dend = qend->basis_frame;
    }
  }

  const int dofs = k + N * nn + k1;
  const int bw = 2 * nn + std::max({k, k1, 0});  // safe over-estimate
  form.K = BandedSym(dofs, std::min(bw, dofs - 1));
  form.M = BandedSym(dofs, std::min(bw, dofs - 1));

  auto node_offset = [&](int node) { return (node == 0) ? 0 : k + (node - 1) * nn; };
  auto node_dofs = [&](int node) { return (node == 0) ? k : (node == N + 1 ? k1 : nn); };
  auto node_basis = [&](int node) -> const Eigen::MatrixXd* {
    if (node == 0) return &D0;
    if (node == N + 1) return &Dend;
    return nullptr;  // identity
  };

  static const double gx[3] = {0.5 - std::sqrt(0.15), 0.5, 0.5 + std::sqrt(0.15)};
  static const double gw[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

  for (int e = 0; e <= N; ++e) {
    const double t0 = e * h;
    // Local kernels over full (restricted) frame coordinates.
    Eigen::MatrixXd kLL = Eigen::MatrixXd::Zero(nn, nn), kLR = kLL, kRR = kLL;
    Eigen::MatrixXd mLL = kLL, mLR = kLL, mRR = kLL;
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(nn, nn);
    for (int g = 0; g < 3; ++g) {
      const double t = t0 + gx[g] * h;
      const Eigen::MatrixXd rfull = sys.R_at(t);
      const Eigen::MatrixXd r = rfull.topLeftCorner(nn, nn);
      form.r_scale = std::max(form.r_scale, rfull.cwiseAbs().maxCoeff());
      const double w = gw[g] * h;
      const double pL = 1.0 - gx[g], pR = gx[g];
      const double dL = -1.0 / h, dR = 1.0 / h;
      kLL += w * (dL * dL * I - pL * pL * r);
      kLR += w * (dL * dR * I - pL * pR * r);
      kRR += w * (dR * dR * I - pR * pR * r);
      mLL += w * (pL * pL) * I;
      mLR += w * (pL * pR) * I;
      mRR += w * (pR * pR) * I;
    }
    const int nodes[2] = {e, e + 1};
    const Eigen::MatrixXd* kern[2][2] = {{&kLL, &kLR}, {nullptr, &kRR}};
    const Eigen::MatrixXd* mass[2][2] = {{&mLL, &mLR}, {nullptr, &mRR}};
    for (int a = 0; a < 2; ++a)
      for (int b = a; b < 2; ++b) {
        const int na = nodes[a], nb = nodes[b];
        const int da = node_dofs(na), db = node_dofs(nb);
        if (da == 0 || db == 0) continue;
        const Eigen::MatrixXd* Ba = node_basis(na);
        const Eigen::MatrixXd* Bb = node_basis(nb);
        Eigen::MatrixXd kblk = *kern[a][b];
        Eigen::MatrixXd mblk = *mass[a][b];
        if (Ba) {
          kblk = Ba->transpose() * kblk;
          mblk = Ba->transpose() * mblk;
        }
        if (Bb) {
          kblk = kblk * (*Bb);
          mblk = mblk * (*Bb);
        }
        const int oa = node_offset(na), ob = node_offset(nb);
        for (int i = 0; i < da; ++i)
          for (int j = 0; j < db; ++j) {
            if (na == nb && j < i) continue;  // keep upper triangle once
            form.K.add(oa + i, ob + j, kblk(i, j));
            form.M.add(oa + i, ob + j, mblk(i, j));
          }
      }
  }

  // Boundary blocks: +g(S~^P .,.) = -Q at node 0, -g(S~^Q .,.) at node N+1.
  for (int i = 0; i < k; ++i)
    for (int j = i; j < k; ++j) form.K.add(i, j, -sys.Q_form()(i, j));
  if (qend) {
    const int off = node_offset(N + 1);
    for (int i = 0; i < k1; ++i)
      for (int j = i; j < k1; ++j) form.K.add(off + i, off + j, -qend->shape_pairing(i, j));
  }
  return form;
}

struct EigenWindow {
  int count = 0;
  std::vector<double> values;
  Eigen::MatrixXd vectors;  // only when requested
};

inline EigenWindow banded_eigen_range(const DiscretizedForm& form, char range, double vl, double vu,
                                      int il, int iu, bool want_vectors) {
  const int n = form.K.dim();
  const int ka = form.K.bw();
  Eigen::MatrixXd ab = form.K.storage();
  Eigen::MatrixXd bb = form.M.storage();
  std::vector<double> w(static_cast<std::size_t>(n));
  std::vector<lapack_int> ifail(static_cast<std::size_t>(n));
  lapack_int found = 0;
  const int zcols = want_vectors ? n : 1;
  Eigen::MatrixXd z(want_vectors ? n : 1, zcols);
  Eigen::MatrixXd q(want_vectors ? n : 1, want_vectors ? n : 1);
  const lapack_int info = LAPACKE_dsbgvx(
      LAPACK_COL_MAJOR, want_vectors ? 'V' : 'N', range, 'U', n, ka, ka, ab.data(),
      static_cast<lapack_int>(ab.rows()), bb.data(), static_cast<lapack_int>(bb.rows()), q.data(),
      static_cast<lapack_int>(q.rows()), vl, vu, il, iu, 0.0, &found, w.data(), z.data(),
      static_cast<lapack_int>(z.rows()), ifail.data());
  if (info != 0)
    throw Error("banded generalized eigensolver failed (info " + std::to_string(info) + ")");
  EigenWindow out;
  out.count = found;
  out.values.assign(w.begin(), w.begin() + found);
  if (want_vectors) out.vectors = z.leftCols(found);
  return out;
}

inline double null_window(const DiscretizedForm& form, double floor) {
  const double h = form.tau / (form.N + 1);
  // PL Rayleigh quotients of kernel modes sit O(h^2) above zero.
  return std::max(floor, h * h * std::max(1.0, form.r_scale * form.r_scale) / 3.0);
}

}  // namespace detail

/// I^gamma_{P,q}: fixed (zero) end at tau, R^k block with the +S~^P term
/// at zero.
inline DiscretizedForm assemble_Pq(const ReducedJacobiSystem& sys, const AssembleOptions& opt = {}) {
  return detail::assemble_form(sys, nullptr, opt);
}

/// I^gamma_{P,Q}: endpoint dofs restricted to T_qQ with the -S~^Q block.
inline DiscretizedForm assemble_PQ(const ReducedJacobiSystem& sys, const QEndData& qend,
                                   const AssembleOptions& opt = {}) {
  return detail::assemble_form(sys, &qend, opt);
}

/// Generalized eigencount K u = lambda M u with the pinned thresholds.
inline IndexResult spectral_index(const DiscretizedForm& form, double eps_neg = 1e-7,
                                  double eps_null_floor = 1e-7) {
  const double eps_null = detail::null_window(form, eps_null_floor);
  IndexResult res;
  res.index = detail::banded_eigen_range(form, 'V', -1e300, -eps_neg, 0, 0, false).count;
  res.nullity = detail::banded_eigen_range(form, 'V', -eps_neg, eps_null, 0, 0, false).count;
  const int head_n = std::min(10, form.K.dim());
  res.head = detail::banded_eigen_range(form, 'I', 0.0, 0.0, 1, head_n, false).values;
  return res;
}

/// Kernel eigenvectors (eigenvalues inside the null window), as nodal frame
/// coordinates per column.
inline Eigen::MatrixXd spectral_kernel(const DiscretizedForm& form, double eps_neg = 1e-7,
                                       double eps_null_floor = 1e-7) {
  const double eps_null = detail::null_window(form, eps_null_floor);
  return detail::banded_eigen_range(form, 'V', -eps_neg, eps_null, 0, 0, true).vectors;
}

/// Assembles at N and 2N and flags instability when the counts move.
inline IndexResult spectral_index_refined(const ReducedJacobiSystem& sys, const QEndData* qend,
                                          AssembleOptions opt) {
  const DiscretizedForm coarse =
      qend ? assemble_PQ(sys, *qend, opt) : assemble_Pq(sys, opt);
  IndexResult res = spectral_index(coarse, opt.eps_neg, opt.eps_null_floor);
  AssembleOptions fine = opt;
  fine.mesh_N = 2 * opt.mesh_N;
  const DiscretizedForm f = qend ? assemble_PQ(sys, *qend, fine) : assemble_Pq(sys, fine);
  const IndexResult rf = spectral_index(f, opt.eps_neg, opt.eps_null_floor);
  res.mesh_stable = (rf.index == res.index && rf.nullity == res.nullity);
  return res;
}

/// Index of the form restricted to fields with vanishing velocity-direction
/// frame coordinate (exactly the g(V, vdot) = 0 constraint).
inline IndexResult normal_restricted_index(const ReducedJacobiSystem& sys,
                                           const QEndData* qend = nullptr,
                                           AssembleOptions opt = {}) {
  opt.restrict_normal = true;
  const DiscretizedForm form = qend ? assemble_PQ(sys, *qend, opt) : assemble_Pq(sys, opt);
  return spectral_index(form, opt.eps_neg, opt.eps_null_floor);
}

/// Broken-Jacobi reduction on a disconjugate partition: coordinates are the
/// field values at the interior nodes, the form is the derivative-jump
/// pairing sum_i <vdot(t_i-) - vdot(t_i+), w(t_i)>.
struct BrokenJacobiForm {
  Eigen::MatrixXd B;      // n(m-1) x n(m-1), symmetrized
  double asym = 0.0;      // symmetry residual before symmetrization
  IndexResult result;
};

inline BrokenJacobiForm broken_jacobi_index(const ReducedJacobiSystem& sys,
                                            const JacobiSolutionMatrix& basis,
                                            const std::vector<double>& partition) {
  const int n = sys.dim();
  const int m = static_cast<int>(partition.size()) - 1;
  if (m < 1 || std::abs(partition.front()) > 1e-12 ||
      std::abs(partition.back() - sys.tau()) > 1e-9)
    throw PreconditionError("broken form: partition must run from 0 to tau");

  BrokenJacobiForm out;
  if (m == 1) {
    out.B = Eigen::MatrixXd::Zero(0, 0);
    return out;
  }

  const auto guarded_inverse = [](const Eigen::MatrixXd& A, const std::string& what) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    const Eigen::VectorXd s = svd.singularValues();
    if (!(s(s.size() - 1) > 1e-7 * std::max(s(0), 1e-300)))
      throw PartitionError("broken form: " + what + " (interpolation matrix near singular)");
    return A.partialPivLu().solve(Eigen::MatrixXd::Identity(A.rows(), A.cols())).eval();
  };

  // First piece: P-Jacobi interpolation through the basis at t_1.
  const double t1 = partition[1];
  const Eigen::MatrixXd A1inv = guarded_inverse(basis.value(t1), "P-focal instant inside (0, t_1]");
  const Eigen::MatrixXd edge0 = basis.derivative(t1) * A1inv;  // vdot(t1-) = edge0 xi_1

  // Interior pieces: fundamental 2n x 2n transfer solves.
  struct Piece {
    Eigen::MatrixXd th11, th12, th21, th22, th12inv;
  };
  std::vector<Piece> pieces;
  for (int i = 1; i < m; ++i) {
    const double a = partition[static_cast<std::size_t>(i)];
    const double b = partition[static_cast<std::size_t>(i) + 1];
    Eigen::MatrixXd V0(n, 2 * n), DV0(n, 2 * n);
    V0 << Eigen::MatrixXd::Identity(n, n), Eigen::MatrixXd::Zero(n, n);
    DV0 << Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Identity(n, n);
    JacobiSolutionMatrix fund(sys, a, b, V0, DV0);
    Piece pc;
    pc.th11 = fund.value(b).leftCols(n);
    pc.th12 = fund.value(b).rightCols(n);
    pc.th21 = fund.derivative(b).leftCols(n);
    pc.th22 = fund.derivative(b).rightCols(n);
    pc.th12inv =
        guarded_inverse(pc.th12, "mutually conjugate endpoints on piece " + std::to_string(i));
    pieces.push_back(std::move(pc));
  }

  const int dim = n * (m - 1);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 1; i < m; ++i) {
    // vdot(t_i-)
    if (i == 1) {
      B.block(0, 0, n, n) += edge0;
    } else {
      const Piece& pc = pieces[static_cast<std::size_t>(i) - 2];  // piece [t_{i-1}, t_i]
      B.block(n * (i - 1), n * (i - 2), n, n) += pc.th21 - pc.th22 * pc.th12inv * pc.th11;
      B.block(n * (i - 1), n * (i - 1), n, n) += pc.th22 * pc.th12inv;
    }
    // -vdot(t_i+): piece [t_i, t_{i+1}] with xi_{i+1} (zero when i+1 == m)
    const Piece& pr = pieces[static_cast<std::size_t>(i) - 1];
    B.block(n * (i - 1), n * (i - 1), n, n) += pr.th12inv * pr.th11;
    if (i + 1 < m) B.block(n * (i - 1), n * i, n, n) += -pr.th12inv;
  }

  out.asym = (B - B.transpose()).cwiseAbs().maxCoeff();
  out.B = 0.5 * (B + B.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.B);
  const double scale = std::max(1.0, out.B.cwiseAbs().maxCoeff());
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    const double ev = es.eigenvalues()(i);
    if (ev < -1e-7 * scale) ++out.result.index;
    else if (ev <= 1e-7 * scale) ++out.result.nullity;
    if (static_cast<int>(out.result.head.size()) < 10) out.result.head.push_back(ev);
  }
  return out;
}

/// The endpoint form A on P-Jacobi fields with prescribed values spanning
/// T_qQ: A_ab = g(DJ_a(tau) - S~^Q(J_a(tau)), J_b(tau)) for J_a(tau) = b_a.
struct EndpointFormA {
  Eigen::MatrixXd A;   // kQ x kQ in the chosen T_qQ basis
  double asym = 0.0;
  IndexResult result;
};

inline EndpointFormA endpoint_form_A(const ReducedJacobiSystem& sys,
                                     const JacobiSolutionMatrix& basis, const QEndData& qend) {
  const int kq = static_cast<int>(qend.basis_frame.cols());
  const double tau = sys.tau();
  const Eigen::MatrixXd Mt = basis.value(tau);
  const Eigen::MatrixXd DMt = basis.derivative(tau);

  EndpointFormA out;
  out.A = Eigen::MatrixXd::Zero(kq, kq);
  if (kq == 0) return out;

  // Span hypothesis {X(tau)} >= T_qQ, solved column by column with the
  // minimum-norm solution (the kernel directions J(tau)=0 drop out of A).
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Mt);
  Eigen::MatrixXd C(basis.cols(), kq);
  for (int a = 0; a < kq; ++a) {
    const Eigen::VectorXd b = qend.basis_frame.col(a);
    const Eigen::VectorXd c = cod.solve(b);
    if ((Mt * c - b).norm() > 1e-6 * std::max(1.0, b.norm()))
      throw HypothesisError("endpoint form: P-Jacobi endpoint values do not span T_qQ");
    C.col(a) = c;
  }
  for (int a = 0; a < kq; ++a)
    for (int b = 0; b < kq; ++b)
      out.A(a, b) = (DMt * C.col(a)).dot(qend.basis_frame.col(b)) - qend.shape_pairing(a, b);
  out.asym = (out.A - out.A.transpose()).cwiseAbs().maxCoeff();
  out.A = 0.5 * (out.A + out.A.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.A);
  const double scale = std::max(1.0, out.A.cwiseAbs().maxCoeff());
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    const double ev = es.eigenvalues()(i);
    if (ev < -1e-7 * scale) ++out.result.index;
    else if (ev <= 1e-7 * scale) ++out.result.nullity;
    out.result.head.push_back(ev);
  }
  return out;
}

/// I^gamma_P evaluated on a piecewise-linear field given by nodal frame
/// coordinates (free right endpoint; the -Q(v0, v0) boundary term included).
inline double pl_form_value(const ReducedJacobiSystem& sys, const std::vector<double>& ts,
                            const Eigen::MatrixXd& values) {
  const int cnt = static_cast<int>(ts.size());
  if (values.cols() != cnt || cnt < 2)
    throw PreconditionError("pl form: need one column per node");
  static const double gx[3] = {0.5 - std::sqrt(0.15), 0.5, 0.5 + std::sqrt(0.15)};
  static const double gw[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
  double acc = 0.0;
  for (int e = 0; e + 1 < cnt; ++e) {
    const double h = ts[e + 1] - ts[e];
    const Eigen::VectorXd dv = (values.col(e + 1) - values.col(e)) / h;
    for (int g = 0; g < 3; ++g) {
      const double t = ts[e] + gx[g] * h;
      const Eigen::VectorXd v = (1.0 - gx[g]) * values.col(e) + gx[g] * values.col(e + 1);
      acc += gw[g] * h * (dv.squaredNorm() - v.dot(sys.R_at(t) * v));
    }
  }
  const int k = sys.k();
  if (k > 0) {
    const Eigen::VectorXd v0 = values.col(0).head(k);
    acc -= v0.dot(sys.Q_form() * v0);
  }
  return acc;
}

/// Prop-3.1-style descent direction at an interior focal instant s: the
/// focal field extended by zero plus eps * bump * (parallel -vdot(s)),
/// with eps minimizing the resulting quadratic.  The returned value is the
/// form value at the minimizer and must be negative.
struct DescentDirection {
  double s = 0.0, delta = 0.0, epsilon = 0.0;
  double value = 0.0;        // -2 eps |vdot(s)|^2 + eps^2 I(phi Y)
  double bump_energy = 0.0;  // I(phi Y, phi Y)
  Eigen::VectorXd focal_combination;
  std::function<Eigen::VectorXd(double)> field;  // frame coordinates of X_eps
};

inline DescentDirection descent_direction(const ReducedJacobiSystem& sys,
                                          const JacobiSolutionMatrix& basis, double s) {
  const double tau = sys.tau();
  if (!(s > 1e-9 && s < tau - 1e-9))
    throw PreconditionError("descent direction: focal instant must be interior");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(basis.value(s), Eigen::ComputeFullV);
  const Eigen::VectorXd smin = svd.singularValues();
  if (!(smin(smin.size() - 1) < 1e-5 * std::max(1.0, smin(0))))
    throw PreconditionError("descent direction: no focal point at s");
  const Eigen::VectorXd c = svd.matrixV().col(svd.matrixV().cols() - 1);
  const Eigen::VectorXd vdot_s = basis.derivative(s) * c;
  const double vdot2 = vdot_s.squaredNorm();

  DescentDirection out;
  out.s = s;
  out.delta = std::min(s, tau - s) / 2.0;
  out.focal_combination = c;
  const double delta = out.delta;
  auto bump = [s, delta](double t) {
    const double q = (t - s) / delta;
    const double b = 1.0 - q * q;
    return b > 0.0 ? b * b * b : 0.0;
  };
  auto dbump = [s, delta](double t) {
    const double q = (t - s) / delta;
    const double b = 1.0 - q * q;
    return b > 0.0 ? 3.0 * b * b * (-2.0 * q / delta) : 0.0;
  };

  // I(phi Y, phi Y) over the bump support by fine Gauss quadrature.
  const Eigen::VectorXd yc = -vdot_s;
  static const double gx[3] = {0.5 - std::sqrt(0.15), 0.5, 0.5 + std::sqrt(0.15)};
  static const double gw[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
  const int segments = 2048;
  const double lo = s - delta, hi = s + delta;
  double q2 = 0.0;
  for (int e = 0; e < segments; ++e) {
    const double a = lo + (hi - lo) * e / segments;
    const double h = (hi - lo) / segments;
    for (int g = 0; g < 3; ++g) {
      const double t = a + gx[g] * h;
      const double phi = bump(t), dphi = dbump(t);
      q2 += gw[g] * h *
            (dphi * dphi * yc.squaredNorm() - phi * phi * yc.dot(sys.R_at(t) * yc));
    }
  }
  out.bump_energy = q2;
  out.epsilon = (q2 > 0.0) ? vdot2 / q2 : 1.0;
  out.value = -2.0 * out.epsilon * vdot2 + out.epsilon * out.epsilon * q2;

  const double eps = out.epsilon;
  const JacobiSolutionMatrix* bp = &basis;
  out.field = [bp, c, s, eps, yc, bump](double t) -> Eigen::VectorXd {
    Eigen::VectorXd z = (t <= s) ? Eigen::VectorXd(bp->value(t) * c)
                                 : Eigen::VectorXd(Eigen::VectorXd::Zero(yc.size()));
    return z + eps * bump(t) * yc;
  };
  return out;
}

/// Index-lemma trials (Prop-3.3 style): against random piecewise-linear
/// fields X with free right endpoint, the P-Jacobi field Y with
/// Y(tau) = X(tau) never loses, with equality only at X = Y.
struct IndexLemmaReport {
  int trials = 0;
  int passes = 0;
  double min_gap = 0.0;  // smallest I(X) - I(Y) observed
};

inline IndexLemmaReport index_lemma_check(const ReducedJacobiSystem& sys,
                                          const JacobiSolutionMatrix& basis, int trials,
                                          Rng& rng) {
  if (!focal_points(sys, basis).empty())
    throw PreconditionError("index lemma: requires a focal-free geodesic segment");
  const int n = sys.dim(), k = sys.k();
  const double tau = sys.tau();
  const Eigen::MatrixXd Mt = basis.value(tau);
  const Eigen::MatrixXd DMt = basis.derivative(tau);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(Mt);

  IndexLemmaReport rep;
  rep.trials = trials;
  rep.min_gap = std::numeric_limits<double>::infinity();
  const int nodes = 17;
  std::vector<double> ts(nodes);
  for (int i = 0; i < nodes; ++i) ts[i] = tau * i / (nodes - 1);
  for (int trial = 0; trial < trials; ++trial) {
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, nodes);
    for (int j = 0; j < nodes; ++j)
      for (int i = 0; i < n; ++i)
        if (j > 0 || i < k) X(i, j) = rng.uniform(-1.0, 1.0);
    const double ix = pl_form_value(sys, ts, X);
    const Eigen::VectorXd c = lu.solve(X.col(nodes - 1));
    const double iy = (DMt * c).dot(Mt * c);
    const double gap = ix - iy;
    rep.min_gap = std::min(rep.min_gap, gap);
    if (gap >= -1e-9 * std::max(1.0, std::abs(ix))) ++rep.passes;
  }
  return rep;
}

}  // namespace finsler
