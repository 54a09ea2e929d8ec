#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <blockloc/geometry/se3.hpp>
#include <blockloc/geometry/trajectory.hpp>
#include <support/oracles.hpp>

#include <random>

using namespace blockloc;

namespace {

TwistSe3d random_twist(std::mt19937_64& rng, double rho_max, double phi_max) {
  std::uniform_real_distribution<double> ur(-rho_max, rho_max);
  std::uniform_real_distribution<double> up(-phi_max, phi_max);
  TwistSe3d xi;
  for (int i = 0; i < 3; ++i) xi(i) = ur(rng);
  Vec3d phi(up(rng), up(rng), up(rng));
  // keep |phi| strictly below the requested bound
  if (phi.norm() > phi_max) phi *= phi_max / phi.norm() * 0.99;
  xi.tail<3>() = phi;
  return xi;
}

}  // namespace

TEST_CASE("se3_exp identity and pure rotation") {
  const PoseSE3d id = se3_exp<double>(TwistSe3d::Zero());
  CHECK(id.translation.norm() == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(rotation_angle(id) == doctest::Approx(0.0).epsilon(1e-15));

  TwistSe3d xi = TwistSe3d::Zero();
  xi(5) = M_PI_2;
  const PoseSE3d p = se3_exp(xi);
  CHECK(p.translation.norm() < 1e-12);
  CHECK(rotation_angle(p) == doctest::Approx(M_PI_2).epsilon(1e-12));
  const Vec3d ex = p.rotation * Vec3d(1, 0, 0);
  CHECK(ex.y() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("se3_exp matches scaling-and-squaring matrix exponential") {
  TwistSe3d xi;
  xi << 1, 2, 3, 0.1, 0.2, 0.3;
  const Mat4d oracle = test::expm(test::twist_hat(xi));
  const Mat4d ours = se3_exp(xi).matrix();
  CHECK((oracle - ours).cwiseAbs().maxCoeff() < 1e-12);

  std::mt19937_64 rng(42);
  for (int i = 0; i < 50; ++i) {
    const TwistSe3d r = random_twist(rng, 5.0, 3.0);
    const Mat4d want = test::expm(test::twist_hat(r));
    const Mat4d got = se3_exp(r).matrix();
    CHECK((want - got).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("se3_log inverts se3_exp for 1000 random twists") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    const TwistSe3d xi = random_twist(rng, 10.0, 3.0);
    const TwistSe3d back = se3_log(se3_exp(xi));
    CHECK((back - xi).norm() < 1e-9);
  }
}

TEST_CASE("se3_log identity and near-pi domain") {
  CHECK(se3_log(PoseSE3d::Identity()).norm() == doctest::Approx(0.0));

  PoseSE3d half_turn;
  half_turn.rotation = Quatd(Eigen::AngleAxisd(M_PI, Vec3d::UnitZ()));
  CHECK_THROWS_AS(se3_log(half_turn), NearPiRotation);

  PoseSE3d almost;
  almost.rotation = Quatd(Eigen::AngleAxisd(M_PI - 1e-3, Vec3d::UnitX()));
  CHECK_NOTHROW(se3_log(almost));
}

TEST_CASE("compose/inverse round trip and quaternion norm") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const PoseSE3d p = se3_exp(random_twist(rng, 20.0, 3.0));
    const PoseSE3d e = compose(p, inverse(p));
    CHECK(rotation_angle(e) < 1e-9);
    CHECK(e.translation.norm() < 1e-9);
    CHECK(std::abs(p.rotation.norm() - 1.0) < 1e-9);
  }
}

TEST_CASE("compose is associative") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 100; ++i) {
    const PoseSE3d a = se3_exp(random_twist(rng, 5, 3));
    const PoseSE3d b = se3_exp(random_twist(rng, 5, 3));
    const PoseSE3d c = se3_exp(random_twist(rng, 5, 3));
    const PoseSE3d ab_c = compose(compose(a, b), c);
    const PoseSE3d a_bc = compose(a, compose(b, c));
    CHECK((ab_c.translation - a_bc.translation).norm() < 1e-9);
    CHECK(rotation_angle(compose(inverse(ab_c), a_bc)) < 1e-9);
  }
}

TEST_CASE("pose_interpolate endpoints and midpoint") {
  std::mt19937_64 rng(5);
  const PoseSE3d base = se3_exp(random_twist(rng, 5, 2));
  const TwistSe3d xi = random_twist(rng, 2, 1);

  const PoseSE3d a0 = pose_interpolate(base, xi, 0.0);
  CHECK((a0.translation - base.translation).norm() < 1e-12);
  CHECK(rotation_angle(compose(inverse(a0), base)) < 1e-12);

  const PoseSE3d a1 = pose_interpolate(base, xi, 1.0);
  const PoseSE3d want = compose(base, se3_exp(xi));
  CHECK((a1.translation - want.translation).norm() < 1e-12);

  TwistSe3d trans = TwistSe3d::Zero();
  trans(0) = 2.0;
  const PoseSE3d half = pose_interpolate(PoseSE3d::Identity(), trans, 0.5);
  CHECK(half.translation.x() == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(pose_interpolate(base, xi, -0.1), InvalidAlpha);
  CHECK_THROWS_AS(pose_interpolate(base, xi, 1.1), InvalidAlpha);
}

TEST_CASE("pose_interpolate twist norm monotone in alpha for pure translation") {
  std::mt19937_64 rng(9);
  TwistSe3d xi = TwistSe3d::Zero();
  xi.head<3>() = Vec3d(3, -1, 2);
  const PoseSE3d base = se3_exp(random_twist(rng, 4, 2));
  double prev = -1.0;
  for (double a = 0.0; a <= 1.0; a += 0.05) {
    const PoseSE3d p = pose_interpolate(base, xi, a);
    const double norm = se3_log(compose(inverse(base), p)).norm();
    CHECK(norm >= prev - 1e-12);
    prev = norm;
  }
}

TEST_CASE("operations are deterministic") {
  TwistSe3d xi;
  xi << 0.3, -1.2, 0.7, 0.2, -0.1, 0.4;
  const PoseSE3d a = se3_exp(xi);
  const PoseSE3d b = se3_exp(xi);
  CHECK(a.translation == b.translation);
  CHECK(a.rotation.coeffs() == b.rotation.coeffs());
  const TwistSe3d la = se3_log(a);
  const TwistSe3d lb = se3_log(b);
  CHECK(la == lb);
}

TEST_CASE("trajectory line format round trip") {
  StampedPose sp;
  sp.stamp = 1234.567890123;
  sp.pose.translation = Vec3d(1.25, -3.5, 0.125);
  sp.pose.rotation = Quatd(Eigen::AngleAxisd(0.7, Vec3d(1, 2, 3).normalized()));
  const StampedPose back = parse_trajectory_line(format_trajectory_line(sp));
  CHECK(back.stamp == doctest::Approx(sp.stamp).epsilon(1e-9));
  CHECK((back.pose.translation - sp.pose.translation).norm() < 1e-8);
  CHECK(rotation_angle(compose(inverse(back.pose), sp.pose)) < 1e-7);
}
