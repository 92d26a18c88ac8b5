#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "finsler/expression.hpp"
#include "finsler/jet.hpp"

using namespace finsler;

namespace {
double eval2(const Expr& e, double a, double b) { return e.eval<double>({a, b}); }
}  // namespace

TEST_CASE("basic arithmetic") {
  const Expr e = Expr::parse("y1^2 + y2^2", {"y1", "y2"});
  CHECK(eval2(e, 1.0, 2.0) == Catch::Approx(5.0));
}

TEST_CASE("functions and products") {
  const Expr e = Expr::parse("sin(x1)*y1", {"x1", "y1"});
  CHECK(eval2(e, 0.0, 3.7) == Catch::Approx(0.0).margin(1e-15));
  CHECK(eval2(e, 1.2, 2.0) == Catch::Approx(std::sin(1.2) * 2.0));
}

TEST_CASE("kropina form by direct substitution") {
  const Expr e = Expr::parse("(y1^2+y2^2)^2/(4*y1^2)", {"y1", "y2"});
  CHECK(eval2(e, 1.0, 0.0) == Catch::Approx(0.25));
}

TEST_CASE("precedence and unary minus") {
  const Expr e = Expr::parse("-x1^2 + 2*x1*x2 - x2/4", {"x1", "x2"});
  CHECK(eval2(e, 3.0, 1.0) == Catch::Approx(-9.0 + 6.0 - 0.25));
  const Expr p = Expr::parse("2^3^1", {});
  CHECK(p.eval<double>({}) == Catch::Approx(8.0));
  const Expr q = Expr::parse("(1+2)*(3-5)", {});
  CHECK(q.eval<double>({}) == Catch::Approx(-6.0));
}

TEST_CASE("evaluation over jets matches the scalar path") {
  const Expr e = Expr::parse("exp(x1)*sin(x2) + sqrt(x1+2)", {"x1", "x2"});
  const double a = 0.4, b = 1.1;
  const double plain = eval2(e, a, b);
  const Jet2 ja = Jet2::variable(a, 0);
  const Jet2 jb = Jet2::variable(b, 1);
  const Jet2 v = e.eval<Jet2>({ja, jb});
  CHECK(v.value() == Catch::Approx(plain));
  CHECK(v.coeff(1u) == Catch::Approx(std::exp(a) * std::sin(b) + 0.5 / std::sqrt(a + 2)));
  CHECK(v.coeff(2u) == Catch::Approx(std::exp(a) * std::cos(b)));
}

TEST_CASE("integer powers work at negative bases through jets") {
  const Expr e = Expr::parse("x1^2", {"x1"});
  const Jet1 v = e.eval<Jet1>({Jet1::variable(-1.5, 0)});
  CHECK(v.value() == Catch::Approx(2.25));
  CHECK(v.coeff(1u) == Catch::Approx(-3.0));
}

TEST_CASE("parse errors carry positions") {
  CHECK_THROWS_AS(Expr::parse("x1 +* 2", {"x1"}), ParseError);
  CHECK_THROWS_AS(Expr::parse("foo(x1)", {"x1"}), ParseError);
  CHECK_THROWS_AS(Expr::parse("x2", {"x1"}), ParseError);
  CHECK_THROWS_AS(Expr::parse("(x1", {"x1"}), ParseError);
  try {
    Expr::parse("x1 + bogus", {"x1"});
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.position == 5);
  }
}
