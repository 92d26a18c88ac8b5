#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "finsler/errors.hpp"

namespace finsler {

/// Truncated-Taylor scalar over up to G square-zero formal generators.
///
/// A value is stored as 2^G coefficients indexed by subsets of the
/// generators: c[mask] is the coefficient of the product of eps_i over the
/// bits of mask.  Every generator squares to zero, so multiplication is a
/// subset convolution and arithmetic is exact on polynomials.  The
/// coefficient of a seeded subset equals the mixed partial derivative along
/// the seeded directions; that is how every tensor in the library is made.
template <int G>
class Jet {
  static_assert(G >= 1 && G <= 4, "jets carry between one and four generators");

public:
  static constexpr int kGens = G;
  static constexpr int kCoeffs = 1 << G;

  Jet() : c_{} {}
  Jet(double value) : c_{} { c_[0] = value; }  // NOLINT: implicit by design

  /// value + eps_gen, the canonical seed of one direction.
  static Jet variable(double value, int gen) {
    Jet j(value);
    j.c_[1u << check_gen(gen)] = 1.0;
    return j;
  }

  double value() const { return c_[0]; }
  double coeff(unsigned mask) const { return c_[check_mask(mask)]; }
  double& coeff_ref(unsigned mask) { return c_[check_mask(mask)]; }
  void set_coeff(unsigned mask, double v) { c_[check_mask(mask)] = v; }

  /// Nilpotent part: the jet minus its value.
  Jet nilpotent() const {
    Jet e = *this;
    e.c_[0] = 0.0;
    return e;
  }

  /// Projection onto the masks containing `mask`, shifted down: the result's
  /// coefficient of m is this jet's coefficient of (m | mask) for m disjoint
  /// from mask.  It is the partial-derivative jet along the masked
  /// generators, still carrying the dependence on all other generators.
  Jet extract(unsigned mask) const {
    check_mask(mask);
    Jet r;
    for (unsigned m = 0; m < kCoeffs; ++m) {
      if ((m & mask) == 0) r.c_[m] = c_[m | mask];
    }
    return r;
  }

  Jet operator-() const {
    Jet r;
    for (int i = 0; i < kCoeffs; ++i) r.c_[i] = -c_[i];
    return r;
  }
  Jet operator+() const { return *this; }

  Jet& operator+=(const Jet& o) {
    for (int i = 0; i < kCoeffs; ++i) c_[i] += o.c_[i];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    for (int i = 0; i < kCoeffs; ++i) c_[i] -= o.c_[i];
    return *this;
  }
  Jet& operator*=(const Jet& o) {
    *this = *this * o;
    return *this;
  }
  Jet& operator/=(const Jet& o) {
    *this = *this / o;
    return *this;
  }
  Jet& operator*=(double s) {
    for (int i = 0; i < kCoeffs; ++i) c_[i] *= s;
    return *this;
  }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }

  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet r;
    for (unsigned s = 0; s < kCoeffs; ++s) {
      double acc = 0.0;
      unsigned t = s;
      for (;;) {
        acc += a.c_[t] * b.c_[s & ~t];
        if (t == 0) break;
        t = (t - 1) & s;
      }
      r.c_[s] = acc;
    }
    return r;
  }

  friend Jet operator*(Jet a, double s) { return a *= s; }
  friend Jet operator*(double s, Jet a) { return a *= s; }

  friend Jet operator/(const Jet& a, const Jet& b) { return a * inverse(b); }
  friend Jet operator/(Jet a, double s) {
    for (int i = 0; i < kCoeffs; ++i) a.c_[i] /= s;
    return a;
  }
  friend Jet operator/(double s, const Jet& b) { return Jet(s) * inverse(b); }

  friend bool operator==(const Jet& a, const Jet& b) { return a.c_ == b.c_; }

  /// Truncated Taylor composition: derivs[k] = f^(k) at the value part.
  /// Returns sum_k derivs[k]/k! * (nilpotent part)^k by Horner evaluation.
  friend Jet compose(const Jet& x, const std::array<double, G + 1>& derivs) {
    const Jet e = x.nilpotent();
    static constexpr double kInvFact[5] = {1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0};
    Jet r(derivs[G] * kInvFact[G]);
    for (int k = G - 1; k >= 0; --k) {
      r = r * e;
      r += Jet(derivs[k] * kInvFact[k]);
    }
    return r;
  }

  friend Jet inverse(const Jet& b) {
    const double b0 = b.value();
    if (b0 == 0.0) throw DomainError("jet division: zero value part");
    std::array<double, G + 1> d;
    double p = 1.0 / b0, fact = 1.0;
    for (int k = 0; k <= G; ++k) {
      d[k] = fact * p;                 // d^k/dx^k (1/x) = (-1)^k k! x^{-k-1}
      p /= b0;
      fact *= -double(k + 1);
    }
    return compose(b, d);
  }

private:
  static int check_gen(int gen) {
    if (gen < 0 || gen >= G)
      throw PreconditionError("jet generator id " + std::to_string(gen) +
                              " outside capacity " + std::to_string(G));
    return gen;
  }
  static unsigned check_mask(unsigned mask) {
    if (mask >= kCoeffs)
      throw PreconditionError("jet generator subset 0x" + std::to_string(mask) +
                              " outside capacity " + std::to_string(G));
    return mask;
  }

  std::array<double, kCoeffs> c_;
};

template <int G>
Jet<G> sqrt(const Jet<G>& x) {
  const double v = x.value();
  if (!(v > 0.0)) throw DomainError("jet sqrt: nonpositive value part");
  const double r = std::sqrt(v);
  std::array<double, G + 1> d{};
  d[0] = r;
  double coef = 0.5 / r;  // successive derivatives of x^(1/2)
  double expo = 0.5;
  for (int k = 1; k <= G; ++k) {
    d[k] = coef;
    expo -= 1.0;
    coef *= expo / v;
  }
  return compose(x, d);
}

template <int G>
Jet<G> exp(const Jet<G>& x) {
  const double e = std::exp(x.value());
  std::array<double, G + 1> d;
  d.fill(e);
  return compose(x, d);
}

template <int G>
Jet<G> log(const Jet<G>& x) {
  const double v = x.value();
  if (!(v > 0.0)) throw DomainError("jet log: nonpositive value part");
  std::array<double, G + 1> d{};
  d[0] = std::log(v);
  double p = 1.0 / v, fact = 1.0;
  for (int k = 1; k <= G; ++k) {
    d[k] = fact * p;  // (-1)^{k-1} (k-1)! x^{-k}
    p /= v;
    fact *= -double(k);
  }
  return compose(x, d);
}

template <int G>
Jet<G> sin(const Jet<G>& x) {
  const double s = std::sin(x.value()), c = std::cos(x.value());
  std::array<double, G + 1> d{};
  const double cycle[4] = {s, c, -s, -c};
  for (int k = 0; k <= G; ++k) d[k] = cycle[k % 4];
  return compose(x, d);
}

template <int G>
Jet<G> cos(const Jet<G>& x) {
  const double s = std::sin(x.value()), c = std::cos(x.value());
  std::array<double, G + 1> d{};
  const double cycle[4] = {c, -s, -c, s};
  for (int k = 0; k <= G; ++k) d[k] = cycle[k % 4];
  return compose(x, d);
}

/// Integer power by repeated multiplication; valid for any value part.
template <int G>
Jet<G> ipow(const Jet<G>& x, long n) {
  if (n < 0) return inverse(ipow(x, -n));
  Jet<G> r(1.0), b = x;
  while (n > 0) {
    if (n & 1) r = r * b;
    b = b * b;
    n >>= 1;
  }
  return r;
}

/// Real power.  Integer exponents reduce to products (any base); otherwise
/// the base value part must be positive.
template <int G>
Jet<G> pow(const Jet<G>& x, double p) {
  const double r = std::round(p);
  if (std::abs(p - r) < 1e-12 && std::abs(r) < 64.0) return ipow(x, static_cast<long>(r));
  const double v = x.value();
  if (!(v > 0.0)) throw DomainError("jet pow: nonpositive value part with non-integer exponent");
  std::array<double, G + 1> d{};
  double coef = std::pow(v, p), expo = p;
  for (int k = 0; k <= G; ++k) {
    d[k] = coef;
    coef *= expo / v;
    expo -= 1.0;
  }
  return compose(x, d);
}

/// Power with a jet exponent: only exponents with no generator content are
/// supported (the expression grammar never produces differentiated
/// exponents that are not plain numbers).
template <int G>
Jet<G> pow(const Jet<G>& x, const Jet<G>& p) {
  if (p.nilpotent() == Jet<G>(0.0)) return pow(x, p.value());
  return exp(p * log(x));
}

template <int G>
bool isfinite(const Jet<G>& x) {
  for (unsigned m = 0; m < Jet<G>::kCoeffs; ++m)
    if (!std::isfinite(x.coeff(m))) return false;
  return true;
}

using Jet1 = Jet<1>;
using Jet2 = Jet<2>;
using Jet3 = Jet<3>;
using Jet4 = Jet<4>;

/// One seeded direction: coordinate index `coord` carries generator `gen`.
struct SeedDirection {
  int coord;
  int gen;
};

/// Lifts a real vector into jets, attaching a unit generator coefficient to
/// each seeded (coordinate, generator) pair.  Distinct generator ids beyond
/// the capacity G raise a PreconditionError.
template <int G>
std::vector<Jet<G>> seed(const Eigen::VectorXd& x, const std::vector<SeedDirection>& directions) {
  std::vector<Jet<G>> out(static_cast<std::size_t>(x.size()));
  for (int i = 0; i < x.size(); ++i) out[static_cast<std::size_t>(i)] = Jet<G>(x[i]);
  unsigned used = 0;
  for (const auto& d : directions) {
    if (d.coord < 0 || d.coord >= x.size())
      throw PreconditionError("seed: coordinate index out of range");
    if (d.gen < 0 || d.gen >= G)
      throw PreconditionError("seed: generator id " + std::to_string(d.gen) +
                              " outside capacity " + std::to_string(G));
    used |= 1u << d.gen;
    auto& j = out[static_cast<std::size_t>(d.coord)];
    j.set_coeff(1u << d.gen, j.coeff(1u << d.gen) + 1.0);
  }
  (void)used;
  return out;
}

/// The mixed partial along the listed generators (each id at most once).
template <int G>
double extract_partial(const Jet<G>& j, const std::vector<int>& gens) {
  unsigned mask = 0;
  for (int g : gens) {
    if (g < 0 || g >= G)
      throw PreconditionError("extract_partial: unknown generator id " + std::to_string(g));
    if (mask & (1u << g))
      throw PreconditionError("extract_partial: repeated generator id " + std::to_string(g));
    mask |= 1u << g;
  }
  return j.coeff(mask);
}

}  // namespace finsler
