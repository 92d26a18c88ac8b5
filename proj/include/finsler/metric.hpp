#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "finsler/errors.hpp"
#include "finsler/expression.hpp"
#include "finsler/jet.hpp"
#include "finsler/util.hpp"

namespace finsler {

/// Base point plus velocity in a single chart; the argument of L, g_v, C_v.
struct TangentVector {
  Eigen::VectorXd x;
  Eigen::VectorXd y;

  TangentVector() = default;
  TangentVector(Eigen::VectorXd x_, Eigen::VectorXd y_) : x(std::move(x_)), y(std::move(y_)) {
    if (x.size() != y.size())
      throw PreconditionError("tangent vector: base and velocity dimensions differ");
  }
  int dim() const { return static_cast<int>(x.size()); }
};

struct FundamentalTensor {
  TangentVector base;
  Eigen::MatrixXd g;
  Eigen::MatrixXd g_inv;
  double rcond = 0.0;
};

struct CartanTensor {
  TangentVector base;
  Grid3<double> C;  // totally symmetric
};

/// Conic pseudo-Finsler Lagrangian evaluated generically over jet scalars.
///
/// Families: euclidean, riemannian (h expressions in x1..xn), randers and
/// kropina (h plus a 1-form omega), and a free-form L(x, y) expression.
/// Instances are immutable after construction.
class Metric {
public:
  enum class Family { Euclidean, Riemannian, Randers, Kropina, CustomL };

  static Metric euclidean(int n) { return Metric(Family::Euclidean, n); }

  /// h given entrywise as expression strings in x1..xn; missing entries
  /// default to the identity.  The matrix is stored symmetrically.
  static Metric riemannian(int n, const std::vector<std::pair<std::pair<int, int>, std::string>>& h_entries) {
    Metric m(Family::Riemannian, n);
    m.set_h(h_entries);
    return m;
  }

  static Metric randers(int n, const std::vector<std::pair<std::pair<int, int>, std::string>>& h_entries,
                        const std::vector<std::string>& omega) {
    Metric m(Family::Randers, n);
    m.set_h(h_entries);
    m.set_omega(omega);
    return m;
  }

  static Metric kropina(int n, const std::vector<std::pair<std::pair<int, int>, std::string>>& h_entries,
                        const std::vector<std::string>& omega) {
    Metric m(Family::Kropina, n);
    m.set_h(h_entries);
    m.set_omega(omega);
    return m;
  }

  static Metric custom(int n, const std::string& lagrangian) {
    Metric m(Family::CustomL, n);
    std::vector<std::string> vars;
    for (int i = 1; i <= n; ++i) vars.push_back("x" + std::to_string(i));
    for (int i = 1; i <= n; ++i) vars.push_back("y" + std::to_string(i));
    m.custom_ = Expr::parse(lagrangian, vars);
    return m;
  }

  int dim() const { return n_; }
  Family family() const { return family_; }

  /// Cartan tensor vanishes identically for Lagrangians quadratic in y.
  bool quadratic_in_y() const {
    return family_ == Family::Euclidean || family_ == Family::Riemannian;
  }

  /// Membership in the conic domain A; invariant under y -> lambda*y.
  bool in_domain(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    if (y.size() != n_ || x.size() != n_) return false;
    if (y.norm() == 0.0) return false;
    switch (family_) {
      case Family::Euclidean:
      case Family::Riemannian:
        return true;
      case Family::Randers: {
        const double hyy = h_quadratic(x, y);
        if (!(hyy > 0.0)) return false;
        return std::sqrt(hyy) + omega_pairing(x, y) > 0.0;
      }
      case Family::Kropina:
        return omega_pairing(x, y) < 0.0;
      case Family::CustomL: {
        std::vector<double> vals(static_cast<std::size_t>(2 * n_));
        for (int i = 0; i < n_; ++i) vals[static_cast<std::size_t>(i)] = x[i];
        for (int i = 0; i < n_; ++i) vals[static_cast<std::size_t>(n_ + i)] = y[i];
        try {
          return std::isfinite(custom_.eval(vals));
        } catch (const Error&) {
          return false;
        }
      }
    }
    return false;
  }
  bool in_domain(const TangentVector& v) const { return in_domain(v.x, v.y); }

  /// The Lagrangian over any jet scalar (or plain double).
  template <class S>
  S eval(const std::vector<S>& x, const std::vector<S>& y) const {
    using std::sqrt;
    switch (family_) {
      case Family::Euclidean: {
        S acc(0.0);
        for (int i = 0; i < n_; ++i) acc += y[i] * y[i];
        return acc;
      }
      case Family::Riemannian:
        return h_quadratic_s(x, y);
      case Family::Randers: {
        S f = sqrt(h_quadratic_s(x, y)) + omega_pairing_s(x, y);
        return f * f;
      }
      case Family::Kropina: {
        S q = h_quadratic_s(x, y) / (2.0 * omega_pairing_s(x, y));
        return q * q;
      }
      case Family::CustomL: {
        std::vector<S> vals;
        vals.reserve(static_cast<std::size_t>(2 * n_));
        vals.insert(vals.end(), x.begin(), x.end());
        vals.insert(vals.end(), y.begin(), y.end());
        return custom_.eval(vals);
      }
    }
    throw Error("metric: corrupt family");
  }

  double eval_L(const TangentVector& v) const {
    require_domain(v);
    std::vector<double> x(v.x.data(), v.x.data() + n_), y(v.y.data(), v.y.data() + n_);
    return eval(x, y);
  }

  /// g_v, half the second fiber derivative of L at v; errors if degenerate.
  FundamentalTensor fundamental_tensor(const TangentVector& v) const {
    require_domain(v);
    FundamentalTensor out;
    out.base = v;
    out.g = fundamental_matrix(v.x, v.y);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(out.g);
    out.rcond = svd.singularValues()(n_ - 1) / svd.singularValues()(0);
    if (!(out.rcond > kRcondThreshold))
      throw NondegeneracyError("fundamental tensor degenerate (rcond " +
                               std::to_string(out.rcond) + ")");
    out.g_inv = out.g.partialPivLu().solve(Eigen::MatrixXd::Identity(n_, n_));
    return out;
  }

  /// Plain g matrix without the nondegeneracy gate (used by hot loops that
  /// run their own checks).
  Eigen::MatrixXd fundamental_matrix(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    std::vector<Jet2> xs = lift<2>(x), ys = lift<2>(y);
    Eigen::MatrixXd g(n_, n_);
    for (int i = 0; i < n_; ++i) {
      for (int j = i; j < n_; ++j) {
        std::vector<Jet2> yy = ys;
        yy[i].set_coeff(1u, yy[i].coeff(1u) + 1.0);
        yy[j].set_coeff(2u, yy[j].coeff(2u) + 1.0);
        const double val = 0.5 * eval(xs, yy).coeff(3u);
        g(i, j) = val;
        g(j, i) = val;
      }
    }
    return g;
  }

  /// Cartan tensor, one quarter of the third fiber derivative.
  CartanTensor cartan_tensor(const TangentVector& v) const {
    require_domain(v);
    CartanTensor out;
    out.base = v;
    out.C = Grid3<double>(n_, n_, n_);
    if (quadratic_in_y()) return out;  // identically zero
    std::vector<Jet3> xs = lift<3>(v.x), ys = lift<3>(v.y);
    for (int i = 0; i < n_; ++i)
      for (int j = i; j < n_; ++j)
        for (int k = j; k < n_; ++k) {
          std::vector<Jet3> yy = ys;
          yy[i].set_coeff(1u, yy[i].coeff(1u) + 1.0);
          yy[j].set_coeff(2u, yy[j].coeff(2u) + 1.0);
          yy[k].set_coeff(4u, yy[k].coeff(4u) + 1.0);
          const double val = 0.25 * eval(xs, yy).coeff(7u);
          out.C(i, j, k) = out.C(i, k, j) = out.C(j, i, k) = val;
          out.C(j, k, i) = out.C(k, i, j) = out.C(k, j, i) = val;
        }
    return out;
  }

  /// dg_ij/dx^m as an (i, j, m) array.
  Grid3<double> dg_dx(const TangentVector& v) const {
    require_domain(v);
    Grid3<double> out(n_, n_, n_);
    std::vector<Jet3> xs = lift<3>(v.x), ys = lift<3>(v.y);
    for (int m = 0; m < n_; ++m) {
      std::vector<Jet3> xx = xs;
      xx[m].set_coeff(4u, xx[m].coeff(4u) + 1.0);
      for (int i = 0; i < n_; ++i)
        for (int j = i; j < n_; ++j) {
          std::vector<Jet3> yy = ys;
          yy[i].set_coeff(1u, yy[i].coeff(1u) + 1.0);
          yy[j].set_coeff(2u, yy[j].coeff(2u) + 1.0);
          const double val = 0.5 * eval(xx, yy).coeff(7u);
          out(i, j, m) = val;
          out(j, i, m) = val;
        }
    }
    return out;
  }

  void require_domain(const TangentVector& v) const {
    if (v.dim() != n_)
      throw PreconditionError("tangent vector dimension " + std::to_string(v.dim()) +
                              " does not match metric dimension " + std::to_string(n_));
    if (!in_domain(v))
      throw DomainError("tangent vector outside the conic domain of the metric");
  }

  template <int G>
  static std::vector<Jet<G>> lift(const Eigen::VectorXd& v) {
    std::vector<Jet<G>> out(static_cast<std::size_t>(v.size()));
    for (int i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = Jet<G>(v[i]);
    return out;
  }

  static constexpr double kRcondThreshold = 1e-10;

private:
  Metric(Family f, int n) : family_(f), n_(n) {
    if (n < 1) throw PreconditionError("metric dimension must be positive");
  }

  void set_h(const std::vector<std::pair<std::pair<int, int>, std::string>>& entries) {
    std::vector<std::string> vars;
    for (int i = 1; i <= n_; ++i) vars.push_back("x" + std::to_string(i));
    h_ = Grid2<Expr>(n_, n_);
    h_given_ = Grid2<char>(n_, n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) h_given_(i, j) = 0;
    for (const auto& [ij, src] : entries) {
      const auto [i, j] = ij;
      if (i < 1 || i > n_ || j < 1 || j > n_)
        throw PreconditionError("metric h entry index out of range");
      Expr e = Expr::parse(src, vars);
      h_(i - 1, j - 1) = e;
      h_(j - 1, i - 1) = e;
      h_given_(i - 1, j - 1) = 1;
      h_given_(j - 1, i - 1) = 1;
    }
  }

  void set_omega(const std::vector<std::string>& omega) {
    if (static_cast<int>(omega.size()) != n_)
      throw PreconditionError("metric omega needs one component per dimension");
    std::vector<std::string> vars;
    for (int i = 1; i <= n_; ++i) vars.push_back("x" + std::to_string(i));
    for (const auto& src : omega) omega_.push_back(Expr::parse(src, vars));
  }

  template <class S>
  S h_entry(int i, int j, const std::vector<S>& x) const {
    if (h_given_.rows() == 0 || !h_given_(i, j)) return S(i == j ? 1.0 : 0.0);
    return h_(i, j).eval(x);
  }

  template <class S>
  S h_quadratic_s(const std::vector<S>& x, const std::vector<S>& y) const {
    S acc(0.0);
    for (int i = 0; i < n_; ++i) {
      acc += h_entry(i, i, x) * y[i] * y[i];
      for (int j = i + 1; j < n_; ++j) acc += 2.0 * h_entry(i, j, x) * y[i] * y[j];
    }
    return acc;
  }

  template <class S>
  S omega_pairing_s(const std::vector<S>& x, const std::vector<S>& y) const {
    S acc(0.0);
    for (int i = 0; i < n_; ++i) acc += omega_[static_cast<std::size_t>(i)].eval(x) * y[i];
    return acc;
  }

  double h_quadratic(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    std::vector<double> xs(x.data(), x.data() + n_), ys(y.data(), y.data() + n_);
    return h_quadratic_s(xs, ys);
  }
  double omega_pairing(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    std::vector<double> xs(x.data(), x.data() + n_), ys(y.data(), y.data() + n_);
    return omega_pairing_s(xs, ys);
  }

  Family family_;
  int n_;
  Grid2<Expr> h_;
  Grid2<char> h_given_;
  std::vector<Expr> omega_;
  Expr custom_;
};

using MetricPtr = std::shared_ptr<const Metric>;

}  // namespace finsler
