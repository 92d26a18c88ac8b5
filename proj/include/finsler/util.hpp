#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "finsler/errors.hpp"

namespace finsler {

/// Dense rank-2 container for scalar types Eigen does not need to know about.
template <class T>
class Grid2 {
public:
  Grid2() : a_(0), b_(0) {}
  Grid2(int a, int b) : a_(a), b_(b), v_(static_cast<std::size_t>(a) * b) {}
  T& operator()(int i, int j) { return v_[static_cast<std::size_t>(i) * b_ + j]; }
  const T& operator()(int i, int j) const { return v_[static_cast<std::size_t>(i) * b_ + j]; }
  int rows() const { return a_; }
  int cols() const { return b_; }

private:
  int a_, b_;
  std::vector<T> v_;
};

template <class T>
class Grid3 {
public:
  Grid3() : a_(0), b_(0), c_(0) {}
  Grid3(int a, int b, int c) : a_(a), b_(b), c_(c), v_(static_cast<std::size_t>(a) * b * c) {}
  T& operator()(int i, int j, int k) {
    return v_[(static_cast<std::size_t>(i) * b_ + j) * c_ + k];
  }
  const T& operator()(int i, int j, int k) const {
    return v_[(static_cast<std::size_t>(i) * b_ + j) * c_ + k];
  }
  int dim0() const { return a_; }
  int dim1() const { return b_; }
  int dim2() const { return c_; }

private:
  int a_, b_, c_;
  std::vector<T> v_;
};

template <class T>
class Grid4 {
public:
  Grid4() : a_(0), b_(0), c_(0), d_(0) {}
  Grid4(int a, int b, int c, int d)
      : a_(a), b_(b), c_(c), d_(d), v_(static_cast<std::size_t>(a) * b * c * d) {}
  T& operator()(int i, int j, int k, int l) {
    return v_[((static_cast<std::size_t>(i) * b_ + j) * c_ + k) * d_ + l];
  }
  const T& operator()(int i, int j, int k, int l) const {
    return v_[((static_cast<std::size_t>(i) * b_ + j) * c_ + k) * d_ + l];
  }
  int dim0() const { return a_; }

private:
  int a_, b_, c_, d_;
  std::vector<T> v_;
};

/// Natural cubic spline through vector-valued samples on a uniform grid.
class CubicSpline {
public:
  CubicSpline() = default;

  CubicSpline(double t0, double t1, std::vector<Eigen::VectorXd> samples)
      : t0_(t0), t1_(t1), y_(std::move(samples)) {
    const int k = static_cast<int>(y_.size());
    if (k < 2 || !(t1 > t0)) throw PreconditionError("spline: need two samples and t1 > t0");
    h_ = (t1_ - t0_) / (k - 1);
    const int n = static_cast<int>(y_.front().size());
    m_.assign(y_.size(), Eigen::VectorXd::Zero(n));
    if (k == 2) return;
    // Tridiagonal (1,4,1) system for interior second derivatives.
    const int m = k - 2;
    Eigen::MatrixXd rhs(m, n);
    for (int i = 0; i < m; ++i)
      rhs.row(i) = (6.0 / (h_ * h_)) * (y_[i] - 2.0 * y_[i + 1] + y_[i + 2]).transpose();
    std::vector<double> diag(m, 4.0);
    for (int i = 1; i < m; ++i) {
      const double w = 1.0 / diag[i - 1];
      diag[i] -= w;
      rhs.row(i) -= w * rhs.row(i - 1);
    }
    Eigen::MatrixXd sol(m, n);
    sol.row(m - 1) = rhs.row(m - 1) / diag[m - 1];
    for (int i = m - 2; i >= 0; --i) sol.row(i) = (rhs.row(i) - sol.row(i + 1)) / diag[i];
    for (int i = 0; i < m; ++i) m_[i + 1] = sol.row(i).transpose();
  }

  Eigen::VectorXd operator()(double t) const {
    const int k = static_cast<int>(y_.size());
    double u = (t - t0_) / h_;
    int i = static_cast<int>(std::floor(u));
    if (i < 0) i = 0;
    if (i > k - 2) i = k - 2;
    const double a = t - (t0_ + i * h_);
    const double b = h_ - a;
    return (m_[i] * (b * b * b) + m_[i + 1] * (a * a * a)) / (6.0 * h_) +
           (y_[i] / h_ - m_[i] * h_ / 6.0) * b + (y_[i + 1] / h_ - m_[i + 1] * h_ / 6.0) * a;
  }

  bool valid() const { return !y_.empty(); }

private:
  double t0_ = 0.0, t1_ = 0.0, h_ = 0.0;
  std::vector<Eigen::VectorXd> y_;
  std::vector<Eigen::VectorXd> m_;
};

/// Deterministic uniform doubles from raw mt19937_64 bits.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

  double uniform() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  Eigen::VectorXd vector(int n, double lo, double hi) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = uniform(lo, hi);
    return v;
  }

private:
  // splitmix64; portable across standard libraries unlike std distributions.
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  std::uint64_t state_;
};

}  // namespace finsler
