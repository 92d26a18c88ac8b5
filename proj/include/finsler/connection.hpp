#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "finsler/errors.hpp"
#include "finsler/jet.hpp"
#include "finsler/metric.hpp"
#include "finsler/util.hpp"

namespace finsler {

/// All connection coefficient arrays of the Chern connection at one tangent
/// vector: formal Christoffel gamma^i_jm, raised Cartan C^i_jm, nonlinear
/// connection N^i_j and full coefficients Gamma^i_jk.
struct ConnectionData {
  TangentVector base;
  Grid3<double> gamma;
  Grid3<double> cartan_up;
  Eigen::MatrixXd N;
  Grid3<double> Gamma;
};

/// hh-curvature R^i_jkl at one tangent vector.
struct CurvatureData {
  TangentVector base;
  Grid4<double> R;
};

namespace detail {

/// Tensor inputs of the coefficient algebra, over the algebra scalar A.
template <class A>
struct PipelineTensors {
  Grid2<A> g;
  Grid3<A> cartan;  // lower indices
  Grid3<A> dgdx;    // (i, j, m) = d g_ij / d x^m
  bool has_cartan = false;
};

/// Plain-scalar tensors: the fiber derivatives come from two- and
/// three-generator jets and are extracted to doubles immediately.
inline PipelineTensors<double> pipeline_tensors(const Metric& m, const Eigen::VectorXd& x,
                                                const Eigen::VectorXd& y) {
  const int n = m.dim();
  PipelineTensors<double> t;
  t.g = Grid2<double>(n, n);
  t.dgdx = Grid3<double>(n, n, n);
  {
    std::vector<Jet2> xs = Metric::lift<2>(x), ys = Metric::lift<2>(y);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        std::vector<Jet2> yy = ys;
        yy[i].set_coeff(1u, yy[i].coeff(1u) + 1.0);
        yy[j].set_coeff(2u, yy[j].coeff(2u) + 1.0);
        const double v = 0.5 * m.eval(xs, yy).coeff(3u);
        t.g(i, j) = t.g(j, i) = v;
      }
  }
  {
    std::vector<Jet3> xs = Metric::lift<3>(x), ys = Metric::lift<3>(y);
    for (int mm = 0; mm < n; ++mm) {
      std::vector<Jet3> xx = xs;
      xx[mm].set_coeff(4u, xx[mm].coeff(4u) + 1.0);
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
          std::vector<Jet3> yy = ys;
          yy[i].set_coeff(1u, yy[i].coeff(1u) + 1.0);
          yy[j].set_coeff(2u, yy[j].coeff(2u) + 1.0);
          const double v = 0.5 * m.eval(xx, yy).coeff(7u);
          t.dgdx(i, j, mm) = t.dgdx(j, i, mm) = v;
        }
    }
    if (!m.quadratic_in_y()) {
      t.has_cartan = true;
      t.cartan = Grid3<double>(n, n, n);
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j)
          for (int k = j; k < n; ++k) {
            std::vector<Jet3> yy = ys;
            yy[i].set_coeff(1u, yy[i].coeff(1u) + 1.0);
            yy[j].set_coeff(2u, yy[j].coeff(2u) + 1.0);
            yy[k].set_coeff(4u, yy[k].coeff(4u) + 1.0);
            const double v = 0.25 * m.eval(xs, yy).coeff(7u);
            t.cartan(i, j, k) = t.cartan(i, k, j) = t.cartan(j, i, k) = v;
            t.cartan(j, k, i) = t.cartan(k, i, j) = t.cartan(k, j, i) = v;
          }
    }
  }
  return t;
}

/// Jet-valued tensors: the ambient inputs may carry generator 3 content
/// (one directional seed); generators 0..2 are reserved for the fiber
/// derivatives and are consumed by the shifted extraction.
inline PipelineTensors<Jet4> pipeline_tensors(const Metric& m, const std::vector<Jet4>& x,
                                              const std::vector<Jet4>& y) {
  const int n = m.dim();
  PipelineTensors<Jet4> t;
  t.g = Grid2<Jet4>(n, n);
  t.dgdx = Grid3<Jet4>(n, n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      std::vector<Jet4> yy = y;
      yy[i].set_coeff(1u, yy[i].coeff(1u) + 1.0);
      yy[j].set_coeff(2u, yy[j].coeff(2u) + 1.0);
      const Jet4 v = 0.5 * m.eval(x, yy).extract(3u);
      t.g(i, j) = t.g(j, i) = v;
    }
  for (int mm = 0; mm < n; ++mm) {
    std::vector<Jet4> xx = x;
    xx[mm].set_coeff(4u, xx[mm].coeff(4u) + 1.0);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        std::vector<Jet4> yy = y;
        yy[i].set_coeff(1u, yy[i].coeff(1u) + 1.0);
        yy[j].set_coeff(2u, yy[j].coeff(2u) + 1.0);
        const Jet4 v = 0.5 * m.eval(xx, yy).extract(7u);
        t.dgdx(i, j, mm) = t.dgdx(j, i, mm) = v;
      }
  }
  if (!m.quadratic_in_y()) {
    t.has_cartan = true;
    t.cartan = Grid3<Jet4>(n, n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j)
        for (int k = j; k < n; ++k) {
          std::vector<Jet4> yy = y;
          yy[i].set_coeff(1u, yy[i].coeff(1u) + 1.0);
          yy[j].set_coeff(2u, yy[j].coeff(2u) + 1.0);
          yy[k].set_coeff(4u, yy[k].coeff(4u) + 1.0);
          const Jet4 v = 0.25 * m.eval(x, yy).extract(7u);
          t.cartan(i, j, k) = t.cartan(i, k, j) = t.cartan(j, i, k) = v;
          t.cartan(j, k, i) = t.cartan(k, i, j) = t.cartan(k, j, i) = v;
        }
  }
  return t;
}

inline Grid2<double> invert_g(const Grid2<double>& g) {
  const int n = g.rows();
  Eigen::MatrixXd ge(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) ge(i, j) = g(i, j);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(ge);
  const double rc = svd.singularValues()(n - 1) / svd.singularValues()(0);
  if (!(rc > Metric::kRcondThreshold))
    throw NondegeneracyError("fundamental tensor degenerate in connection pipeline (rcond " +
                             std::to_string(rc) + ")");
  Eigen::MatrixXd inv = ge.partialPivLu().solve(Eigen::MatrixXd::Identity(n, n));
  Grid2<double> out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = inv(i, j);
  return out;
}

/// Inverse of a jet-valued symmetric matrix through the nilpotent series
/// (G0 + E)^-1 = sum_k (-G0^-1 E)^k G0^-1, exact at jet order four.
inline Grid2<Jet4> invert_g(const Grid2<Jet4>& g) {
  const int n = g.rows();
  Eigen::MatrixXd g0(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g0(i, j) = g(i, j).value();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(g0);
  const double rc = svd.singularValues()(n - 1) / svd.singularValues()(0);
  if (!(rc > Metric::kRcondThreshold))
    throw NondegeneracyError("fundamental tensor degenerate in curvature pipeline (rcond " +
                             std::to_string(rc) + ")");
  Eigen::MatrixXd b = g0.partialPivLu().solve(Eigen::MatrixXd::Identity(n, n));
  // X = -B E, nilpotent.
  Grid2<Jet4> xm(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Jet4 acc(0.0);
      for (int k = 0; k < n; ++k) acc += (-b(i, k)) * g(k, j).nilpotent();
      xm(i, j) = acc;
    }
  // S = I + X + X^2 + X^3 + X^4.
  Grid2<Jet4> s(n, n), p = xm;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s(i, j) = Jet4(i == j ? 1.0 : 0.0) + xm(i, j);
  for (int power = 2; power <= 4; ++power) {
    Grid2<Jet4> np(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Jet4 acc(0.0);
        for (int k = 0; k < n; ++k) acc += p(i, k) * xm(k, j);
        np(i, j) = acc;
      }
    p = np;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s(i, j) += p(i, j);
  }
  Grid2<Jet4> out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Jet4 acc(0.0);
      for (int k = 0; k < n; ++k) acc += s(i, k) * b(k, j);
      out(i, j) = acc;
    }
  return out;
}

template <class A>
struct ConnCoeffs {
  Grid2<A> g, ginv;
  Grid3<A> gamma;
  Grid3<A> cartan_up;
  Grid2<A> N;
  Grid3<A> Gamma;
  bool has_cartan = false;
};

/// The coefficient displays: gamma from g and its x-derivatives, N from
/// gamma and the raised Cartan tensor, Gamma from all three.
template <class A, class VecT>
ConnCoeffs<A> connection_algebra(const Metric& m, const VecT& x, const VecT& y) {
  const int n = m.dim();
  PipelineTensors<A> t = pipeline_tensors(m, x, y);
  ConnCoeffs<A> c;
  c.g = t.g;
  c.ginv = invert_g(t.g);
  c.has_cartan = t.has_cartan;
  c.gamma = Grid3<A>(n, n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int mm = 0; mm < n; ++mm) {
        A acc(0.0);
        for (int s = 0; s < n; ++s)
          acc += c.ginv(i, s) * (t.dgdx(s, j, mm) + t.dgdx(mm, s, j) - t.dgdx(j, mm, s));
        c.gamma(i, j, mm) = 0.5 * acc;
      }

  c.N = Grid2<A>(n, n);
  if (!t.has_cartan) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        A acc(0.0);
        for (int mm = 0; mm < n; ++mm) acc += c.gamma(i, j, mm) * y[mm];
        c.N(i, j) = acc;
      }
    c.Gamma = c.gamma;
    c.cartan_up = Grid3<A>(n, n, n);
    return c;
  }

  c.cartan_up = Grid3<A>(n, n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int mm = 0; mm < n; ++mm) {
        A acc(0.0);
        for (int l = 0; l < n; ++l) acc += c.ginv(i, l) * t.cartan(l, j, mm);
        c.cartan_up(i, j, mm) = acc;
      }

  // q_m = gamma^m_rs y^r y^s
  std::vector<A> q(static_cast<std::size_t>(n), A(0.0));
  for (int mm = 0; mm < n; ++mm) {
    A acc(0.0);
    for (int r = 0; r < n; ++r)
      for (int s = 0; s < n; ++s) acc += c.gamma(mm, r, s) * y[r] * y[s];
    q[static_cast<std::size_t>(mm)] = acc;
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      A acc(0.0);
      for (int mm = 0; mm < n; ++mm)
        acc += c.gamma(i, j, mm) * y[mm] - c.cartan_up(i, j, mm) * q[static_cast<std::size_t>(mm)];
      c.N(i, j) = acc;
    }

  c.Gamma = Grid3<A>(n, n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        A acc(0.0);
        for (int l = 0; l < n; ++l) {
          A inner(0.0);
          for (int r = 0; r < n; ++r)
            inner += t.cartan(j, l, r) * c.N(r, k) - t.cartan(j, k, r) * c.N(r, l) +
                     t.cartan(l, k, r) * c.N(r, j);
          acc += c.ginv(l, i) * inner;
        }
        c.Gamma(i, j, k) = c.gamma(i, j, k) - acc;
      }
  return c;
}

}  // namespace detail

inline ConnectionData connection_data(const Metric& m, const TangentVector& v) {
  m.require_domain(v);
  auto c = detail::connection_algebra<double>(m, v.x, v.y);
  ConnectionData out;
  out.base = v;
  out.gamma = c.gamma;
  out.cartan_up = c.cartan_up;
  out.Gamma = c.Gamma;
  const int n = m.dim();
  out.N = Eigen::MatrixXd(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out.N(i, j) = c.N(i, j);
  return out;
}

/// Gamma^k_ij contracted twice with the velocity: the geodesic equation's
/// right-hand side is minus this.
inline Eigen::VectorXd geodesic_spray(const Metric& m, const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& y) {
  auto c = detail::connection_algebra<double>(m, x, y);
  const int n = m.dim();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < n; ++k) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) acc += c.Gamma(k, i, j) * y[i] * y[j];
    out[k] = acc;
  }
  return out;
}

/// Gamma coefficients alone (plain scalars), for covariant derivatives.
inline Grid3<double> chern_coefficients(const Metric& m, const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& y) {
  return detail::connection_algebra<double>(m, x, y).Gamma;
}

/// hh-curvature R^i_jkl by differentiating the whole coefficient pipeline
/// with one extra jet generator per direction; the delta/delta x^k
/// horizontal derivative subtracts the N-weighted fiber derivative.
inline CurvatureData hh_curvature(const Metric& m, const TangentVector& v) {
  m.require_domain(v);
  const int n = m.dim();
  auto base = detail::connection_algebra<double>(m, v.x, v.y);

  std::vector<Grid3<double>> dGdx(static_cast<std::size_t>(n));
  std::vector<Grid3<double>> dGdy(static_cast<std::size_t>(n));
  const bool need_fiber = !m.quadratic_in_y();
  for (int d = 0; d < n; ++d) {
    std::vector<Jet4> xs = Metric::lift<4>(v.x), ys = Metric::lift<4>(v.y);
    xs[d].set_coeff(8u, 1.0);
    auto c = detail::connection_algebra<Jet4>(m, xs, ys);
    Grid3<double> g3(n, n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) g3(i, j, k) = c.Gamma(i, j, k).coeff(8u);
    dGdx[static_cast<std::size_t>(d)] = g3;
  }
  if (need_fiber) {
    for (int d = 0; d < n; ++d) {
      std::vector<Jet4> xs = Metric::lift<4>(v.x), ys = Metric::lift<4>(v.y);
      ys[d].set_coeff(8u, 1.0);
      auto c = detail::connection_algebra<Jet4>(m, xs, ys);
      Grid3<double> g3(n, n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k) g3(i, j, k) = c.Gamma(i, j, k).coeff(8u);
      dGdy[static_cast<std::size_t>(d)] = g3;
    }
  }

  auto horizontal = [&](int i, int j, int l, int k) {
    // delta Gamma^i_jl / delta x^k
    double acc = dGdx[static_cast<std::size_t>(k)](i, j, l);
    if (need_fiber)
      for (int mm = 0; mm < n; ++mm)
        acc -= base.N(mm, k) * dGdy[static_cast<std::size_t>(mm)](i, j, l);
    return acc;
  };

  CurvatureData out;
  out.base = v;
  out.R = Grid4<double>(n, n, n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          double acc = horizontal(i, j, l, k) - horizontal(i, j, k, l);
          for (int h = 0; h < n; ++h)
            acc += base.Gamma(i, h, k) * base.Gamma(h, j, l) -
                   base.Gamma(i, h, l) * base.Gamma(h, j, k);
          out.R(i, j, k, l) = acc;
        }
  return out;
}

/// R_v(xi, eta) zeta contracted from R^i_jkl (xi -> k, eta -> l, zeta -> j).
inline Eigen::VectorXd curvature_apply(const CurvatureData& cd, const Eigen::VectorXd& xi,
                                       const Eigen::VectorXd& eta, const Eigen::VectorXd& zeta) {
  const int n = static_cast<int>(xi.size());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) acc += xi[k] * eta[l] * zeta[j] * cd.R(i, j, k, l);
    out[i] = acc;
  }
  return out;
}

/// g_v(R_v(v, u) v, w), the curvature pairing behind the index form.
inline double flag_curvature_form(const Metric& m, const TangentVector& v,
                                  const Eigen::VectorXd& u, const Eigen::VectorXd& w) {
  CurvatureData cd = hh_curvature(m, v);
  Eigen::VectorXd r = curvature_apply(cd, v.y, u, v.y);
  Eigen::MatrixXd g = m.fundamental_matrix(v.x, v.y);
  return (w.transpose() * g * r)(0);
}

/// Frame-reduced curvature matrix: r^{ij} = -g(R_vdot(vdot, E_i) vdot, E_j)
/// for the columns E_i of a g-orthonormal frame.  Symmetrized; the
/// asymmetry residual is reported through *asym when requested.
inline Eigen::MatrixXd reduced_curvature_matrix(const Metric& m, const Eigen::VectorXd& x,
                                                const Eigen::VectorXd& y, const Eigen::MatrixXd& E,
                                                double* asym = nullptr) {
  const int n = m.dim();
  CurvatureData cd = hh_curvature(m, TangentVector(x, y));
  // T(a, l) = R^a_jkl vdot^k vdot^j
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
  for (int a = 0; a < n; ++a)
    for (int l = 0; l < n; ++l) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) acc += cd.R(a, j, k, l) * y[k] * y[j];
      T(a, l) = acc;
    }
  Eigen::MatrixXd g = m.fundamental_matrix(x, y);
  Eigen::MatrixXd M = E.transpose() * g * T * E;  // M(j,i) = g(R(vdot,E_i)vdot, E_j)
  if (asym) *asym = (M - M.transpose()).cwiseAbs().maxCoeff();
  return -0.5 * (M + M.transpose());
}

}  // namespace finsler
