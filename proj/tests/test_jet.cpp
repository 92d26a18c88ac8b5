#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "finsler/jet.hpp"
#include "oracles.hpp"

using namespace finsler;

TEST_CASE("seeded square recovers the first derivative") {
  // d/dx x^2 = 2x at x = 3
  auto x = Jet1::variable(3.0, 0);
  auto sq = x * x;
  CHECK(sq.value() == Catch::Approx(9.0));
  CHECK(sq.coeff(1u) == Catch::Approx(6.0));
}

TEST_CASE("fourth mixed partial of x1 x2 x3 x4 is one") {
  Eigen::VectorXd x(4);
  x << 1.3, -0.7, 2.2, 0.4;
  auto js = seed<4>(x, {{0, 0}, {1, 1}, {2, 2}, {3, 3}});
  Jet4 prod = js[0] * js[1] * js[2] * js[3];
  CHECK(extract_partial(prod, {0, 1, 2, 3}) == Catch::Approx(1.0));
  CHECK(prod.value() == Catch::Approx(x.prod()));
}

TEST_CASE("no generators means plain evaluation") {
  Eigen::VectorXd x(2);
  x << 2.0, 5.0;
  auto js = seed<2>(x, {});
  Jet2 v = js[0] * js[1] + js[0];
  CHECK(extract_partial(v, {}) == Catch::Approx(12.0));
  for (unsigned m = 1; m < 4; ++m) CHECK(v.coeff(m) == 0.0);
}

TEST_CASE("sqrt and sin first-order coefficients") {
  auto a = Jet1::variable(4.0, 0);
  auto r = sqrt(a);
  CHECK(r.value() == Catch::Approx(2.0));
  CHECK(r.coeff(1u) == Catch::Approx(0.25));

  auto s = sin(Jet1::variable(0.0, 0));
  CHECK(s.value() == Catch::Approx(0.0).margin(1e-15));
  CHECK(s.coeff(1u) == Catch::Approx(1.0));
}

TEST_CASE("mixed second derivative of 1/x against finite differences") {
  // Two generators on the same coordinate produce the pure second partial.
  auto x = Jet2(2.0);
  x.set_coeff(1u, 1.0);
  x.set_coeff(2u, 1.0);
  auto inv = 1.0 / x;
  const double jet_val = inv.coeff(3u);
  CHECK(jet_val == Catch::Approx(0.25));  // d2/dx2 (1/x) = 2/x^3 = 0.25 at 2

  Eigen::VectorXd at(1);
  at << 2.0;
  const double fd = oracles::fd_partial2([](const Eigen::VectorXd& z) { return 1.0 / z[0]; }, at,
                                         0, 0, 1e-4);
  CHECK(jet_val == Catch::Approx(fd).epsilon(1e-6));
}

TEST_CASE("derivative order above polynomial degree vanishes") {
  Eigen::VectorXd x(1);
  x << 1.7;
  auto js = seed<4>(x, {{0, 0}, {0, 1}, {0, 2}, {0, 3}});
  Jet4 cube = js[0] * js[0] * js[0];  // degree three
  CHECK(extract_partial(cube, {0, 1, 2, 3}) == Catch::Approx(0.0).margin(1e-13));
}

TEST_CASE("euclidean Lagrangian Hessian is 2 delta") {
  Eigen::VectorXd y(3);
  y << 0.3, -1.1, 0.8;
  auto lagr = [](const Eigen::VectorXd& z) { return z.squaredNorm(); };
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      auto js = seed<2>(y, {{i, 0}, {j, 1}});
      Jet2 L = js[0] * js[0] + js[1] * js[1] + js[2] * js[2];
      const double jet_val = extract_partial(L, {0, 1});
      CHECK(jet_val == Catch::Approx(i == j ? 2.0 : 0.0).margin(1e-12));
      CHECK(jet_val == Catch::Approx(oracles::fd_partial2(lagr, y, i, j)).margin(1e-6));
    }
}

TEST_CASE("polynomial exactness up to degree four") {
  // p(x) = sum of monomials of total degree <= 4 in three variables with
  // fixed coefficients; every mixed partial taken by jets must match the
  // analytically differentiated polynomial to near machine precision.
  auto p = [](auto x0, auto x1, auto x2) {
    return 0.7 * x0 * x0 * x1 * x2 - 1.3 * x1 * x1 * x1 * x0 + 2.1 * x2 * x2 * x0 * x1 +
           0.4 * x0 * x0 * x0 * x0 - 0.9 * x1 * x2 + 1.5 * x0 - 2.0;
  };
  Eigen::VectorXd x(3);
  x << 0.9, -0.6, 1.4;

  SECTION("third mixed partial d3/dx0 dx1 dx2") {
    auto js = seed<3>(x, {{0, 0}, {1, 1}, {2, 2}});
    const double got = extract_partial(p(js[0], js[1], js[2]), {0, 1, 2});
    // d3p/dx0dx1dx2 = 1.4 x0 + 4.2 x2 (from the first and third monomials)
    const double expect = 1.4 * x[0] + 4.2 * x[2];
    CHECK(got == Catch::Approx(expect).epsilon(1e-13));
  }
  SECTION("pure fourth partial in x0") {
    auto js = seed<4>(x, {{0, 0}, {0, 1}, {0, 2}, {0, 3}});
    const double got = extract_partial(p(js[0], js[1], js[2]), {0, 1, 2, 3});
    CHECK(got == Catch::Approx(0.4 * 24.0).epsilon(1e-13));
  }
  SECTION("second partial x1 x1") {
    auto js = seed<2>(x, {{1, 0}, {1, 1}});
    const double got = extract_partial(p(js[0], js[1], js[2]), {0, 1});
    const double expect = -1.3 * 6.0 * x[1] * x[0];
    CHECK(got == Catch::Approx(expect).epsilon(1e-13));
  }
}

TEST_CASE("transcendental lifts against finite differences") {
  Eigen::VectorXd x(2);
  x << 0.8, 1.9;
  auto f = [](const Eigen::VectorXd& z) {
    return std::sin(z[0]) * std::exp(0.3 * z[1]) + std::sqrt(z[1]) / z[0];
  };
  auto fj = [](Jet2 a, Jet2 b) { return sin(a) * exp(0.3 * b) + sqrt(b) / a; };
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      std::vector<SeedDirection> dirs = {{i, 0}, {j, 1}};
      auto js = seed<2>(x, dirs);
      const double got = extract_partial(fj(js[0], js[1]), {0, 1});
      CHECK(got == Catch::Approx(oracles::fd_partial2(f, x, i, j)).margin(2e-6));
    }
}

TEST_CASE("pow handles integer exponents at negative bases") {
  auto x = Jet1::variable(-2.0, 0);
  auto p = pow(x, 2.0);
  CHECK(p.value() == Catch::Approx(4.0));
  CHECK(p.coeff(1u) == Catch::Approx(-4.0));
  CHECK_THROWS_AS(pow(x, 0.5), DomainError);
}

TEST_CASE("error paths") {
  CHECK_THROWS_AS(Jet2::variable(1.0, 2), PreconditionError);  // beyond capacity
  Eigen::VectorXd x(1);
  x << 1.0;
  CHECK_THROWS_AS((seed<4>(x, {{0, 4}})), PreconditionError);  // fifth generator id
  CHECK_THROWS_AS((seed<4>(x, {{2, 0}})), PreconditionError);  // coord out of range
  CHECK_THROWS_AS(1.0 / Jet2(0.0), DomainError);
  CHECK_THROWS_AS(sqrt(Jet2(-1.0)), DomainError);
  CHECK_THROWS_AS(sqrt(Jet2(0.0)), DomainError);
  CHECK_THROWS_AS(extract_partial(Jet2(1.0), {0, 0}), PreconditionError);  // repeated id
}

TEST_CASE("division matches series inversion on a full jet") {
  // a / b computed two ways: operator/ and a * inverse(b) with a randomized
  // dense four-generator jet; also checks b * (a/b) == a.
  Jet4 a(1.7), b(2.4);
  for (unsigned m = 1; m < 16; ++m) {
    a.set_coeff(m, 0.1 * static_cast<double>((m * 7) % 5) - 0.2);
    b.set_coeff(m, 0.05 * static_cast<double>((m * 3) % 7) - 0.1);
  }
  Jet4 q = a / b;
  Jet4 back = q * b;
  for (unsigned m = 0; m < 16; ++m) CHECK(back.coeff(m) == Catch::Approx(a.coeff(m)).margin(1e-12));
}
