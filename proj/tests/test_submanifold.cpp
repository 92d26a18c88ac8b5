#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>

#include "finsler/submanifold.hpp"
#include "oracles.hpp"

using namespace finsler;

namespace {
MetricPtr euclid(int n) { return std::make_shared<Metric>(Metric::euclidean(n)); }
}  // namespace

TEST_CASE("tangent bases") {
  const Submanifold circle = Submanifold::circle(Eigen::Vector2d(0, 0), 1.0);
  const Eigen::MatrixXd B = circle.tangent_basis(Eigen::VectorXd::Zero(1));
  REQUIRE(B.cols() == 1);
  CHECK((B.col(0) - Eigen::Vector2d(0, 1)).norm() < 1e-14);

  const Submanifold pt = Submanifold::point(Eigen::Vector2d(1, 2));
  CHECK(pt.tangent_basis(Eigen::VectorXd::Zero(0)).cols() == 0);

  // Sphere of radius 2 as a graph over the equatorial plane: at the pole the
  // basis is the two horizontal unit vectors.
  const Submanifold graph = Submanifold::graph(
      3, 2, {"u1", "u2", "sqrt(4 - u1*u1 - u2*u2)"});
  const Eigen::MatrixXd Bg = graph.tangent_basis(Eigen::VectorXd::Zero(2));
  CHECK((Bg.col(0) - Eigen::Vector3d(1, 0, 0)).norm() < 1e-12);
  CHECK((Bg.col(1) - Eigen::Vector3d(0, 1, 0)).norm() < 1e-12);

  // Rank deficiency: the polar parametrization of the sphere degenerates at
  // the poles.
  const Submanifold sp = Submanifold::sphere(Eigen::Vector3d(0, 0, 0), 1.0);
  CHECK_THROWS_AS(sp.tangent_basis(Eigen::Vector2d(0.0, 0.3)), PreconditionError);
}

TEST_CASE("orthogonality checks") {
  MetricPtr eu = euclid(2);
  const Submanifold circle = Submanifold::circle(Eigen::Vector2d(0, 0), 1.0);
  const Eigen::VectorXd u0 = Eigen::VectorXd::Zero(1);

  Geodesic radial(eu, Eigen::Vector2d(1, 0), Eigen::Vector2d(-1, 0), 0.5);
  const OrthogonalityReport rep = orthogonality_check(radial, circle, u0);
  CHECK(rep.residual_start <= 1e-10);

  // Equator geodesic crossing a meridian circle on the round sphere.
  MetricPtr sp = std::make_shared<Metric>(
      Metric::riemannian(2, {{{1, 1}, "1"}, {{2, 2}, "sin(x1)^2"}}));
  const double half_pi = 1.5707963267948966;
  Geodesic equator(sp, Eigen::Vector2d(half_pi, 0), Eigen::Vector2d(0, 1), 1.0);
  // meridian through phi = 0 as a graph: (u1, 0)
  const Submanifold meridian = Submanifold::graph(2, 1, {"u1", "0"});
  Eigen::VectorXd um(1);
  um << half_pi;
  const OrthogonalityReport rep2 = orthogonality_check(equator, meridian, um);
  CHECK(rep2.residual_start <= 1e-8);

  // A tilted line is caught: residual about |sin(tilt)|.
  const double tilt = 0.3;
  Geodesic tilted(eu, Eigen::Vector2d(1, 0),
                  Eigen::Vector2d(-std::cos(tilt), std::sin(tilt)), 0.5);
  const OrthogonalityReport rep3 = orthogonality_check(tilted, circle, u0);
  CHECK(rep3.residual_start == Catch::Approx(std::sin(tilt)).epsilon(1e-10));
  CHECK(rep3.residual_start > 1e-3);

  // Endpoint membership failures are loud.
  Geodesic off(eu, Eigen::Vector2d(1.5, 0), Eigen::Vector2d(-1, 0), 0.5);
  CHECK_THROWS_AS(orthogonality_check(off, circle, u0), PreconditionError);
}

TEST_CASE("orthogonal splitting") {
  MetricPtr eu = euclid(2);
  const Submanifold circle = Submanifold::circle(Eigen::Vector2d(0, 0), 1.0);
  const Eigen::VectorXd u0 = Eigen::VectorXd::Zero(1);
  const Eigen::Vector2d v(-1, 0);  // inward normal at (1, 0)
  const OrthogonalSplitting sp = splitting(*eu, circle, u0, v);
  // tanP projects onto the circle tangent
  CHECK((sp.tanP * Eigen::Vector2d(0, 1) - Eigen::Vector2d(0, 1)).norm() < 1e-12);
  CHECK((sp.tanP * v).norm() < 1e-12);
  // idempotence and complementarity
  CHECK((sp.tanP * sp.tanP - sp.tanP).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((sp.tanP + sp.norP - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-14);

  // Kropina metric, line P: g_v(norP u, w) = 0 for every tangent w.
  MetricPtr kr = std::make_shared<Metric>(Metric::kropina(2, {}, {"-1", "0.2"}));
  const Submanifold line = Submanifold::line(Eigen::Vector2d(0, 0), Eigen::Vector2d(0, 1));
  const Eigen::VectorXd ul = Eigen::VectorXd::Zero(1);
  const Eigen::VectorXd vn =
      project_to_normal_cone(*kr, line, ul, Eigen::Vector2d(1.0, 0.1));
  const OrthogonalSplitting sk = splitting(*kr, line, ul, vn);
  const Eigen::MatrixXd G = kr->fundamental_matrix(Eigen::Vector2d(0, 0), vn);
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd u = rng.vector(2, -1, 1);
    const double res = std::abs((sk.norP * u).dot(G * sk.tangent_basis.col(0)));
    CHECK(res <= 1e-9);
  }
}

TEST_CASE("shape operators") {
  // Circle of radius rho with the inward unit normal: S-tilde = -(1/rho) id.
  for (double rho : {1.0, 2.5}) {
    MetricPtr eu = euclid(2);
    const Submanifold circle = Submanifold::circle(Eigen::Vector2d(0, 0), rho);
    Eigen::VectorXd u0(1);
    u0 << 0.7;
    const Eigen::VectorXd p = circle.embed(u0);
    const Eigen::VectorXd v = -p.normalized();
    const ShapeData sd = shape_operator(*eu, circle, u0, v);
    CHECK(sd.S_tilde(0, 0) == Catch::Approx(-1.0 / rho).epsilon(1e-10));

    // Finite-difference oracle: S-tilde u = tan(d/ds V(psi(u + s)))
    // for the inward unit normal field V(x) = -x/|x| along the embedding.
    auto normal_field = [&](double s) -> Eigen::VectorXd {
      Eigen::VectorXd us(1);
      us << u0[0] + s;
      const Eigen::VectorXd q = circle.embed(us);
      return -q.normalized();
    };
    const Eigen::VectorXd dV = oracles::fd_curve_derivative(normal_field, 0.0);
    const Eigen::MatrixXd B = sd.tangent_basis;
    // coordinates of the tangential part of dV in the parameter basis
    const double coeff = B.col(0).dot(dV) / B.col(0).squaredNorm();
    CHECK(sd.S_tilde(0, 0) == Catch::Approx(coeff).margin(1e-8));
  }

  // Straight line: flat, shape operator zero.
  {
    MetricPtr eu = euclid(2);
    const Submanifold line = Submanifold::line(Eigen::Vector2d(0, 1), Eigen::Vector2d(1, 0));
    Eigen::VectorXd u0 = Eigen::VectorXd::Zero(1);
    const ShapeData sd = shape_operator(*eu, line, u0, Eigen::Vector2d(0, -1));
    CHECK(std::abs(sd.S_tilde(0, 0)) < 1e-12);
  }

  // Sphere of radius rho in R^3, inward normal: both eigenvalues -(1/rho).
  {
    const double rho = 2.0;
    MetricPtr eu = euclid(3);
    const Submanifold sphere = Submanifold::sphere(Eigen::Vector3d(0, 0, 0), rho);
    Eigen::VectorXd u0(2);
    u0 << 1.2, 0.4;
    const Eigen::VectorXd p = sphere.embed(u0);
    const Eigen::VectorXd v = -p.normalized();
    const ShapeData sd = shape_operator(*eu, sphere, u0, v);
    // Eigenvalues of the operator (parameter basis is not orthonormal, so
    // solve the generalized problem with the induced Gram matrix).
    const Eigen::MatrixXd G =
        sd.tangent_basis.transpose() * sd.tangent_basis;  // h = euclidean
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(
        -sd.pairing, G);  // pairing = g(S~ b_a, b_b)
    CHECK(es.eigenvalues()(0) == Catch::Approx(1.0 / rho).epsilon(1e-8));
    CHECK(es.eigenvalues()(1) == Catch::Approx(1.0 / rho).epsilon(1e-8));
  }

  // Direction must be normal.
  {
    MetricPtr eu = euclid(2);
    const Submanifold circle = Submanifold::circle(Eigen::Vector2d(0, 0), 1.0);
    Eigen::VectorXd u0 = Eigen::VectorXd::Zero(1);
    CHECK_THROWS_AS(shape_operator(*eu, circle, u0, Eigen::Vector2d(-1, 0.3)),
                    PreconditionError);
  }
}

TEST_CASE("shape duality and self-adjointness on a Finsler metric") {
  MetricPtr ra = std::make_shared<Metric>(
      Metric::randers(3, {{{1, 1}, "1 + 0.05*x3"}, {{2, 2}, "1"}, {{3, 3}, "1"}},
                      {"0.1", "-0.05", "0.05"}));
  const Submanifold sphere = Submanifold::sphere(Eigen::Vector3d(0, 0, 0), 1.3);
  Eigen::VectorXd u0(2);
  u0 << 1.0, 0.8;
  const Eigen::VectorXd p = sphere.embed(u0);
  const Eigen::VectorXd v =
      project_to_normal_cone(*ra, sphere, u0, (-p.normalized() * 0.9).eval());
  const ShapeData sd = shape_operator(*ra, sphere, u0, v);
  const Eigen::MatrixXd G = ra->fundamental_matrix(p, v);
  const Eigen::MatrixXd B = sd.tangent_basis;
  // duality residual g(S(b_a, b_b), v) + g(S~ b_a, b_b), with the second
  // pairing recomputed from the solved operator coordinates
  const Eigen::MatrixXd W = B.transpose() * G * B;
  const Eigen::MatrixXd WS = W * sd.S_tilde;  // (b, a) entry = g(S~ b_a, b_b)
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      Eigen::VectorXd s_ab(3);
      for (int i = 0; i < 3; ++i) s_ab[i] = sd.second_form(i, a, b);
      const double lhs = s_ab.dot(G * v);
      CHECK(std::abs(lhs + WS(b, a)) <= 1e-9 * std::max(1.0, std::abs(lhs)));
      // second fundamental form lands in the normal complement
      CHECK(std::abs(s_ab.dot(G * B.col(0))) < 1e-9);
      CHECK(std::abs(s_ab.dot(G * B.col(1))) < 1e-9);
    }
  // self-adjointness w.r.t. g restricted to the tangent space
  CHECK((WS - WS.transpose()).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("shape operator is parametrization independent") {
  MetricPtr eu = euclid(2);
  const Submanifold c1 = Submanifold::circle(Eigen::Vector2d(0, 0), 1.0);
  const Submanifold c2 = Submanifold::graph(2, 1, {"cos(2*u1)", "sin(2*u1)"});
  Eigen::VectorXd u1(1), u2(1);
  u1 << 0.8;
  u2 << 0.4;  // same chart point
  const Eigen::VectorXd p = c1.embed(u1);
  REQUIRE((p - c2.embed(u2)).norm() < 1e-12);
  const Eigen::VectorXd v = -p.normalized();
  const ShapeData s1 = shape_operator(*eu, c1, u1, v);
  const ShapeData s2 = shape_operator(*eu, c2, u2, v);
  // compare the second fundamental form on the same ambient tangent vector
  const Eigen::VectorXd b1 = s1.tangent_basis.col(0);
  const Eigen::VectorXd b2 = s2.tangent_basis.col(0);
  const double scale = b2.norm() / b1.norm();
  Eigen::VectorXd f1(2), f2(2);
  for (int i = 0; i < 2; ++i) {
    f1[i] = s1.second_form(i, 0, 0) * scale * scale;
    f2[i] = s2.second_form(i, 0, 0);
  }
  CHECK((f1 - f2).norm() <= 1e-8 * std::max(1.0, f2.norm()));
}

TEST_CASE("normal exponential map") {
  MetricPtr eu = euclid(2);
  const Submanifold circle = Submanifold::circle(Eigen::Vector2d(0, 0), 1.0);
  Eigen::VectorXd u0(1);
  u0 << 0.3;
  const Eigen::VectorXd p = circle.embed(u0);

  // Inward vector of length one half lands at radius one half on the ray.
  const Eigen::VectorXd v = -0.5 * p.normalized();
  const Eigen::VectorXd q = normal_exp(eu, circle, u0, v);
  CHECK(q.norm() == Catch::Approx(0.5).margin(1e-10));
  CHECK((q.normalized() - p.normalized()).norm() < 1e-10);

  // Differential against central differences through the normal cone.
  auto curve = [&](double s) -> std::pair<Eigen::VectorXd, Eigen::VectorXd> {
    Eigen::VectorXd us = u0;
    us[0] += s;
    const Eigen::VectorXd z =
        project_to_normal_cone(*eu, circle, us, (v + s * Eigen::Vector2d(0.2, -0.1)).eval());
    return {us, z};
  };
  const double eps = 1e-4;
  const auto [up, zp] = curve(eps);
  const auto [um, zm] = curve(-eps);
  const Eigen::VectorXd dx = (circle.embed(up) - circle.embed(um)) / (2 * eps);
  const Eigen::VectorXd dy = (zp - zm) / (2 * eps);
  const Eigen::VectorXd got = normal_exp_differential(eu, circle, u0, v, dx, dy);
  const Eigen::VectorXd fd =
      (normal_exp(eu, circle, up, zp) - normal_exp(eu, circle, um, zm)) / (2 * eps);
  CHECK((got - fd).norm() <= 1e-5 * std::max(1.0, fd.norm()));

  // At inward length one (the focal center) the differential drops rank.
  const Eigen::VectorXd v1 = -p.normalized();
  const auto dirs = normal_bundle_tangent_basis(*eu, circle, u0, v1);
  Eigen::MatrixXd D(2, static_cast<int>(dirs.size()));
  for (std::size_t c = 0; c < dirs.size(); ++c)
    D.col(static_cast<int>(c)) =
        normal_exp_differential(eu, circle, u0, v1, dirs[c].first, dirs[c].second);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(D);
  CHECK(svd.singularValues()(1) < 1e-7 * svd.singularValues()(0));

  // Non-normal directions are rejected.
  CHECK_THROWS_AS(normal_exp(eu, circle, u0, (v + Eigen::Vector2d(0, 0.4)).eval()),
                  PreconditionError);
}

TEST_CASE("normal bundle tangent basis satisfies the constraint linearization") {
  MetricPtr ra = std::make_shared<Metric>(
      Metric::randers(2, {{{1, 1}, "1 + 0.1*x2"}, {{2, 2}, "1"}}, {"0.1", "0.05"}));
  const Submanifold circle = Submanifold::circle(Eigen::Vector2d(0, 0), 1.0);
  Eigen::VectorXd u0(1);
  u0 << 1.1;
  const Eigen::VectorXd p = circle.embed(u0);
  const Eigen::VectorXd v =
      project_to_normal_cone(*ra, circle, u0, (-0.8 * p.normalized()).eval());
  const auto dirs = normal_bundle_tangent_basis(*ra, circle, u0, v);
  REQUIRE(dirs.size() == 2);
  // Push each direction a small step and measure the constraint violation;
  // it must be second order in the step.
  const Eigen::MatrixXd B = circle.tangent_basis(u0);
  for (const auto& [dx, dy] : dirs) {
    const double s = 1e-5;
    // move the parameter so the base stays on P: dx = B * du
    const double du = B.col(0).dot(dx) / B.col(0).squaredNorm();
    Eigen::VectorXd us = u0;
    us[0] += s * du;
    const Eigen::VectorXd ps = circle.embed(us);
    const Eigen::VectorXd zs = v + s * dy;
    const Eigen::MatrixXd G = ra->fundamental_matrix(ps, zs);
    const Eigen::MatrixXd Bs = circle.tangent_basis(us);
    const double viol = std::abs(zs.dot(G * Bs.col(0)));
    CHECK(viol <= 1e-8);  // first order term cancels
  }
}
