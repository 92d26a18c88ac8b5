#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "finsler/errors.hpp"

namespace finsler {

struct OdeOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  double initial_step = 0.0;   // 0 selects automatically
  long max_steps = 4000000;
};

using OdeRhs = std::function<void(double, const Eigen::VectorXd&, Eigen::VectorXd&)>;
/// Returns true while the state is acceptable; the first failure is located
/// by bisection on the dense interpolant and the solution is truncated there.
using OdePredicate = std::function<bool(double, const Eigen::VectorXd&)>;

/// Dense solution of an initial value problem, stored as the classic
/// Dormand-Prince continuous extension per accepted step.
class OdeSolution {
public:
  double t0() const { return t0_; }
  double t1() const { return t_end_; }
  bool event_stopped() const { return event_stopped_; }

  Eigen::VectorXd operator()(double t) const {
    if (steps_.empty()) throw IntegrationError("dense solution is empty");
    const Step& s = locate(t);
    const double theta = (t - s.t) / s.h;
    const double th1 = 1.0 - theta;
    return s.r1 + theta * (s.r2 + th1 * (s.r3 + theta * (s.r4 + th1 * s.r5)));
  }

  const std::vector<double>& mesh() const { return mesh_; }

private:
  friend OdeSolution integrate_dopri5(const OdeRhs&, double, const Eigen::VectorXd&, double,
                                      const OdeOptions&, const OdePredicate*);
  struct Step {
    double t, h;
    Eigen::VectorXd r1, r2, r3, r4, r5;
  };

  const Step& locate(double t) const {
    if (t <= steps_.front().t) return steps_.front();
    if (t >= steps_.back().t + steps_.back().h) return steps_.back();
    std::size_t lo = 0, hi = steps_.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi + 1) / 2;
      if (steps_[mid].t <= t) lo = mid;
      else hi = mid - 1;
    }
    return steps_[lo];
  }

  double t0_ = 0.0, t_end_ = 0.0;
  bool event_stopped_ = false;
  std::vector<Step> steps_;
  std::vector<double> mesh_;
};

/// Adaptive embedded Runge-Kutta 5(4) with fourth-order dense output.
inline OdeSolution integrate_dopri5(const OdeRhs& f, double t0, const Eigen::VectorXd& y0,
                                    double t1, const OdeOptions& opt = {},
                                    const OdePredicate* inside = nullptr) {
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                      a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                      a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                      b6 = 11.0 / 84;
  static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                      e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  static const double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                      d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                      d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

  if (!(t1 > t0)) throw PreconditionError("ode: need t1 > t0");
  const int n = static_cast<int>(y0.size());
  OdeSolution sol;
  sol.t0_ = t0;
  sol.mesh_.push_back(t0);

  Eigen::VectorXd y = y0, k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n),
                  yerr(n);
  double t = t0;
  f(t, y, k1);
  if (inside && !(*inside)(t0, y0))
    throw PreconditionError("ode: initial state violates the admissibility predicate");

  double h = opt.initial_step;
  if (h <= 0.0) {
    const double d0 = y.norm(), dd = k1.norm();
    h = (dd > 1e-12) ? 0.01 * std::max(1e-6, d0) / dd : 1e-6;
    h = std::min(h, (t1 - t0) / 10.0);
    h = std::max(h, 1e-12);
  }

  long steps = 0;
  const double hmin = 1e-14 * (t1 - t0);
  while (t < t1) {
    if (++steps > opt.max_steps) throw IntegrationError("ode: step budget exhausted");
    if (h < hmin) throw IntegrationError("ode: step size collapsed at t=" + std::to_string(t));
    h = std::min(h, t1 - t);

    ytmp = y + h * (a21 * k1);
    f(t + h / 5.0, ytmp, k2);
    ytmp = y + h * (a31 * k1 + a32 * k2);
    f(t + 3.0 * h / 10.0, ytmp, k3);
    ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    f(t + 4.0 * h / 5.0, ytmp, k4);
    ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    f(t + 8.0 * h / 9.0, ytmp, k5);
    ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    f(t + h, ytmp, k6);
    ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    f(t + h, ynew, k7);
    yerr = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double err = 0.0;
    for (int i = 0; i < n; ++i) {
      const double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      const double q = yerr[i] / sc;
      err += q * q;
    }
    err = std::sqrt(err / n);

    if (err <= 1.0) {
      OdeSolution::Step st;
      st.t = t;
      st.h = h;
      st.r1 = y;
      st.r2 = ynew - y;
      st.r3 = h * k1 - st.r2;
      st.r4 = st.r2 - h * k7 - st.r3;
      st.r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
      sol.steps_.push_back(std::move(st));
      sol.mesh_.push_back(t + h);

      if (inside && !(*inside)(t + h, ynew)) {
        // Bisect the exit time on the dense interpolant of this step.
        double lo = 0.0, hi = 1.0;
        const OdeSolution::Step& s = sol.steps_.back();
        auto at = [&](double theta) -> Eigen::VectorXd {
          const double th1 = 1.0 - theta;
          return s.r1 + theta * (s.r2 + th1 * (s.r3 + theta * (s.r4 + th1 * s.r5)));
        };
        for (int it = 0; it < 80 && (hi - lo) * h > 1e-13 * std::max(1.0, t + h); ++it) {
          const double mid = 0.5 * (lo + hi);
          if ((*inside)(t + mid * h, at(mid))) lo = mid;
          else hi = mid;
        }
        sol.t_end_ = t + lo * h;
        sol.event_stopped_ = true;
        sol.mesh_.back() = sol.t_end_;
        throw DomainExitError("ode: trajectory left the admissible domain at t=" +
                                  std::to_string(sol.t_end_),
                              sol.t_end_);
      }

      t += h;
      y.swap(ynew);
      k1.swap(k7);
      const double fac = (err > 0.0) ? 0.9 * std::pow(err, -0.2) : 5.0;
      h *= std::clamp(fac, 0.2, 5.0);
    } else {
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
    }
  }
  sol.t_end_ = t1;
  return sol;
}

}  // namespace finsler
