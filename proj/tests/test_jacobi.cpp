#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>

#include "finsler/jacobi.hpp"
#include "oracles.hpp"

using namespace finsler;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kHalfPi = 1.5707963267948966;

MetricPtr euclid(int n) { return std::make_shared<Metric>(Metric::euclidean(n)); }

MetricPtr sphere2() {
  return std::make_shared<Metric>(Metric::riemannian(2, {{{1, 1}, "1"}, {{2, 2}, "sin(x1)^2"}}));
}

struct SphereSetup {
  MetricPtr m;
  Geodesic geo;
  ReducedJacobiSystem sys;
};

SphereSetup sphere_point_setup(double tau) {
  MetricPtr m = sphere2();
  Geodesic geo(m, Eigen::Vector2d(kHalfPi, 0), Eigen::Vector2d(0, 1), tau);
  ReducedJacobiSystem sys = reduce(geo);
  return {m, std::move(geo), std::move(sys)};
}

struct CircleSetup {
  MetricPtr m;
  Geodesic geo;
  Submanifold P;
  Eigen::VectorXd u0;
  ReducedJacobiSystem sys;
};

CircleSetup circle_setup(double tau) {
  MetricPtr m = euclid(2);
  Geodesic geo(m, Eigen::Vector2d(1, 0), Eigen::Vector2d(-1, 0), tau);
  Submanifold P = Submanifold::circle(Eigen::Vector2d(0, 0), 1.0);
  Eigen::VectorXd u0 = Eigen::VectorXd::Zero(1);
  ReducedJacobiSystem sys = reduce(geo, &P, &u0);
  return {m, std::move(geo), std::move(P), std::move(u0), std::move(sys)};
}

}  // namespace

TEST_CASE("reduction data on flat space with a circle boundary") {
  CircleSetup cs = circle_setup(0.5);
  CHECK(cs.sys.k() == 1);
  // r vanishes, Q = +1 (shape operator of the unit circle is -1 inward)
  CHECK(cs.sys.R_at(0.25).cwiseAbs().maxCoeff() < 1e-10);
  REQUIRE(cs.sys.Q_form().rows() == 1);
  CHECK(cs.sys.Q_form()(0, 0) == Catch::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("reduction on the unit sphere: curvature matrix diag(1, 0)") {
  SphereSetup ss = sphere_point_setup(4.0);
  for (double t : {0.3, 1.7, 3.6}) {
    const Eigen::MatrixXd r = ss.sys.R_at(t);
    CHECK(r(0, 0) == Catch::Approx(1.0).epsilon(1e-8));
    CHECK(std::abs(r(0, 1)) < 1e-8);
    CHECK(std::abs(r(1, 1)) < 1e-8);
    // spline cache against the exact evaluation
    CHECK((r - ss.sys.R_exact(t)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("non-perpendicular start is rejected") {
  MetricPtr m = euclid(2);
  Geodesic geo(m, Eigen::Vector2d(1, 0), Eigen::Vector2d(-0.95, 0.31224989991992), 0.5);
  Submanifold P = Submanifold::circle(Eigen::Vector2d(0, 0), 1.0);
  Eigen::VectorXd u0 = Eigen::VectorXd::Zero(1);
  CHECK_THROWS_AS(reduce(geo, &P, &u0), PreconditionError);
}

TEST_CASE("jacobi initial value solutions") {
  CircleSetup cs = circle_setup(1.5);
  // r = 0: v(t) = t w.
  Eigen::VectorXd z = Eigen::VectorXd::Zero(2), w(2);
  w << 0.3, -0.8;
  JacobiSolutionMatrix sol = jacobi_ivp(cs.sys, z, w);
  CHECK((sol.value(1.2) - 1.2 * w).norm() < 1e-9);

  SphereSetup ss = sphere_point_setup(4.0);
  Eigen::VectorXd nrm(2);
  nrm << 1, 0;  // normal frame direction
  JacobiSolutionMatrix js = jacobi_ivp(ss.sys, Eigen::VectorXd::Zero(2), nrm);
  for (double t : {0.5, 1.5, 3.0})
    CHECK(js.value(t)(0) == Catch::Approx(std::sin(t)).margin(1e-8));

  // superposition
  Eigen::VectorXd a0(2), da0(2), b0(2), db0(2);
  a0 << 0.2, -0.1;
  da0 << 0.5, 0.3;
  b0 << -0.7, 0.4;
  db0 << 0.1, -0.9;
  JacobiSolutionMatrix ja = jacobi_ivp(ss.sys, a0, da0);
  JacobiSolutionMatrix jb = jacobi_ivp(ss.sys, b0, db0);
  JacobiSolutionMatrix jc = jacobi_ivp(ss.sys, (2.0 * a0 - 0.5 * b0).eval(),
                                       (2.0 * da0 - 0.5 * db0).eval());
  for (double t : {0.9, 2.7})
    CHECK((jc.value(t) - (2.0 * ja.value(t) - 0.5 * jb.value(t))).norm() <= 1e-9);
}

TEST_CASE("P-Jacobi basis boundary data and closed forms") {
  // Circle P of radius 1: column one is (1 - t) e1.
  CircleSetup cs = circle_setup(1.5);
  JacobiSolutionMatrix basis = p_jacobi_basis(cs.sys);
  for (double t : {0.2, 0.9, 1.4})
    CHECK(basis.value(t)(0, 0) == Catch::Approx(1.0 - t).margin(1e-9));
  CHECK(std::abs(basis.value(1.0)(0, 0)) < 1e-9);

  // Sphere point P: normal column is sin(t), the last column t sqrt(L0) e_n.
  SphereSetup ss = sphere_point_setup(4.0);
  JacobiSolutionMatrix sb = p_jacobi_basis(ss.sys);
  for (double t : {0.4, 2.2, 3.9}) {
    CHECK(sb.value(t)(0, 0) == Catch::Approx(std::sin(t)).margin(1e-8));
    Eigen::VectorXd expect = Eigen::VectorXd::Zero(2);
    expect(1) = t * std::sqrt(ss.sys.L0());
    CHECK((sb.value(t).col(1) - expect).norm() < 1e-8);
  }

  // Euclidean point P: columns k+1..n-1 are t e_i.
  MetricPtr eu = euclid(3);
  Geodesic geo(eu, Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(0, 0, 1), 2.0);
  ReducedJacobiSystem sys = reduce(geo);
  JacobiSolutionMatrix eb = p_jacobi_basis(sys);
  for (double t : {0.5, 1.5}) {
    CHECK((eb.value(t).col(0) - t * Eigen::Vector3d(1, 0, 0)).norm() < 1e-10);
    CHECK((eb.value(t).col(1) - t * Eigen::Vector3d(0, 1, 0)).norm() < 1e-10);
  }
}

TEST_CASE("wronskian constancy across the basis") {
  SphereSetup ss = sphere_point_setup(4.0);
  JacobiSolutionMatrix basis = p_jacobi_basis(ss.sys);
  for (double t : {0.1, 1.0, 2.5, 3.9}) {
    const Eigen::MatrixXd V = basis.value(t), DV = basis.derivative(t);
    const Eigen::MatrixXd w = V.transpose() * DV - DV.transpose() * V;
    CHECK(w.cwiseAbs().maxCoeff() <= 1e-8);  // P-Jacobi pairs pair to zero
  }
}

TEST_CASE("focal point detection") {
  // Euclidean point P: no focal points.
  MetricPtr eu = euclid(2);
  Geodesic geo(eu, Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0), 3.0);
  ReducedJacobiSystem sys = reduce(geo);
  JacobiSolutionMatrix basis = p_jacobi_basis(sys);
  CHECK(focal_points(sys, basis).empty());

  // Unit sphere, point P, tau = 4: one conjugate instant at pi.
  SphereSetup ss = sphere_point_setup(4.0);
  JacobiSolutionMatrix sb = p_jacobi_basis(ss.sys);
  const auto focal = focal_points(ss.sys, sb);
  REQUIRE(focal.size() == 1);
  CHECK(std::abs(focal[0].t - kPi) <= 1e-6);
  CHECK(focal[0].multiplicity == 1);
  CHECK(focal[0].certain);

  // Circle P radius 1, tau = 1.5: focal instant at the center, 1/kappa = 1.
  CircleSetup cs = circle_setup(1.5);
  JacobiSolutionMatrix cb = p_jacobi_basis(cs.sys);
  const auto cfocal = focal_points(cs.sys, cb);
  REQUIRE(cfocal.size() == 1);
  CHECK(std::abs(cfocal[0].t - 1.0) <= 1e-6);
  CHECK(cfocal[0].multiplicity == 1);

  // Sphere of radius 1 in R^3: multiplicity two at distance one.
  MetricPtr e3 = euclid(3);
  Geodesic radial(e3, Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(-1, 0, 0), 1.5);
  Submanifold P = Submanifold::sphere(Eigen::Vector3d(0, 0, 0), 1.0);
  Eigen::VectorXd u0(2);
  u0 << kHalfPi, 0.0;
  ReducedJacobiSystem s3 = reduce(radial, &P, &u0);
  JacobiSolutionMatrix b3 = p_jacobi_basis(s3);
  const auto f3 = focal_points(s3, b3);
  REQUIRE(f3.size() == 1);
  CHECK(std::abs(f3[0].t - 1.0) <= 1e-6);
  CHECK(f3[0].multiplicity == 2);
}

TEST_CASE("conjugate point detection") {
  MetricPtr eu = euclid(2);
  Geodesic geo(eu, Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0), 3.0);
  ReducedJacobiSystem sys = reduce(geo);
  CHECK(conjugate_points(sys, 0.0, 3.0).empty());

  SphereSetup ss = sphere_point_setup(7.0);
  const auto conj = conjugate_points(ss.sys, 0.0, 7.0);
  REQUIRE(conj.size() == 2);
  CHECK(std::abs(conj[0].t - kPi) <= 1e-6);
  CHECK(std::abs(conj[1].t - 2 * kPi) <= 1e-6);
  CHECK(conj[0].multiplicity == 1);
  CHECK(conj[1].multiplicity == 1);

  // Short intervals stay conjugate free.
  CHECK(conjugate_points(ss.sys, 1.0, 2.0).empty());
  CHECK(conjugate_points(ss.sys, 4.0, 6.0).empty());
}

TEST_CASE("disconjugate partitions") {
  MetricPtr eu = euclid(2);
  Geodesic geo(eu, Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0), 3.0);
  ReducedJacobiSystem sys = reduce(geo);
  JacobiSolutionMatrix basis = p_jacobi_basis(sys);
  const auto part = disconjugate_partition(sys, focal_points(sys, basis));
  CHECK(part.size() == 2);  // the whole interval

  SphereSetup ss = sphere_point_setup(4.0);
  JacobiSolutionMatrix sb = p_jacobi_basis(ss.sys);
  const auto spart = disconjugate_partition(ss.sys, focal_points(ss.sys, sb));
  REQUIRE(spart.size() >= 3);
  // the first interior node is below pi and some node straddles pi
  CHECK(spart[1] < kPi);
  bool straddles = false;
  for (std::size_t i = 0; i + 1 < spart.size(); ++i)
    straddles = straddles || (spart[i] < kPi && spart[i + 1] > kPi);
  CHECK(straddles);
  // every piece passes its own conjugate scan
  for (std::size_t i = 0; i + 1 < spart.size(); ++i)
    CHECK(conjugate_points(ss.sys, spart[i], spart[i + 1], 512).empty());

  CircleSetup cs = circle_setup(1.5);
  JacobiSolutionMatrix cb = p_jacobi_basis(cs.sys);
  const auto cpart = disconjugate_partition(cs.sys, focal_points(cs.sys, cb));
  CHECK(cpart[1] < 1.0);
}
