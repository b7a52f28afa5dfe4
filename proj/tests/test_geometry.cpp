#include <doctest.h>

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "bevdebias/error.hpp"
#include "bevdebias/geometry.hpp"
#include "bevdebias/rng.hpp"

using namespace bevdebias;

namespace {

CameraModel identity_camera(double f = 1000.0) {
  return {"id", {f, f, 352.0, 192.0, 704, 384}, Extrinsics::identity()};
}

CameraModel random_camera(Rng& rng) {
  CameraModel cam;
  cam.intrinsics = {rng.uniform(300, 1500), rng.uniform(300, 1500), rng.uniform(200, 500),
                    rng.uniform(100, 280), 704, 384};
  cam.extrinsics = euler_pose(rng.uniform(-3, 3), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2),
                              {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0.5, 2.5)});
  return cam;
}

double max_abs(const Mat3& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("project: optical-axis point lands on the principal point") {
  const PixelPoint p = project({0, 0, 10}, identity_camera());
  CHECK(p.u == doctest::Approx(352.0));
  CHECK(p.v == doctest::Approx(192.0));
  CHECK(p.d == doctest::Approx(10.0));
}

TEST_CASE("project: 1 m lateral offset at 20 m with f=1260 moves u by 63 px") {
  CameraModel cam = identity_camera(1260.0);
  CHECK(project({1, 0, 20}, cam).u - 352.0 == doctest::Approx(63.0));
  // Same point through a forward-looking level camera: ego (20, -1, 0) is 1 m to the right.
  cam.extrinsics = yaw_only_extrinsics(0.0, Vec3::Zero());
  CHECK(project({20, -1, 0}, cam).u - 352.0 == doctest::Approx(63.0));
}

TEST_CASE("project: degenerate depth throws") {
  CHECK_THROWS_AS((void)project({1, 1, 0}, identity_camera()), DegenerateProjection);
  CHECK_THROWS_AS((void)project({1, 1, 1e-10}, identity_camera()), DegenerateProjection);
}

TEST_CASE("unproject: inverse of the principal-point example") {
  const EgoPoint p = unproject({352, 192, 10}, identity_camera());
  CHECK(p.x == doctest::Approx(0.0));
  CHECK(p.y == doctest::Approx(0.0));
  CHECK(p.z == doctest::Approx(10.0));
  CHECK_THROWS_AS((void)unproject({1, 1, 0}, identity_camera()), InvalidDepth);
  CHECK_THROWS_AS((void)unproject({1, 1, -3}, identity_camera()), InvalidDepth);
}

TEST_CASE("unproject: huge depth stays finite") {
  Rng rng(3);
  const EgoPoint p = unproject({0, 0, 1e6}, random_camera(rng));
  CHECK(std::isfinite(p.x));
  CHECK(std::isfinite(p.y));
  CHECK(std::isfinite(p.z));
}

TEST_CASE("round trips on random cameras") {
  Rng rng(11);
  int checked = 0;
  for (int i = 0; i < 1000; ++i) {
    const CameraModel cam = random_camera(rng);
    const PixelPoint px{rng.uniform(0, 704), rng.uniform(0, 384), rng.uniform(0.5, 80)};
    const PixelPoint back = project(unproject(px, cam), cam);
    CHECK(std::abs(back.u - px.u) <= 1e-9 * std::max(1.0, std::abs(px.u)));
    CHECK(std::abs(back.v - px.v) <= 1e-9 * std::max(1.0, std::abs(px.v)));
    CHECK(std::abs(back.d - px.d) <= 1e-9 * px.d);

    const EgoPoint p{rng.uniform(-40, 40), rng.uniform(-40, 40), rng.uniform(-1, 3)};
    if (cam.extrinsics.apply(p.vec()).z() > 0.5) {
      const EgoPoint q = unproject(project(p, cam), cam);
      CHECK((q.vec() - p.vec()).norm() <= 1e-9 * std::max(1.0, p.vec().norm()));
      ++checked;
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("yaw_only_extrinsics") {
  // theta = 0 at the origin is the pure axis change ego -> camera.
  const Extrinsics e0 = yaw_only_extrinsics(0.0, Vec3::Zero());
  CHECK(max_abs(level_yaw_rotation(0.0) - Mat3::Identity()) == 0.0);
  CHECK(max_abs(e0.rotation - ego_to_level_camera()) == 0.0);
  CHECK(e0.translation.norm() == 0.0);

  // Hand-evaluated rotation at theta = pi/2: [[0,0,1],[0,1,0],[-1,0,0]].
  Mat3 a3;
  a3 << 0, 0, 1,
        0, 1, 0,
        -1, 0, 0;
  const Vec3 r = level_yaw_rotation(std::numbers::pi / 2) * Vec3(1, 0, 0);
  CHECK((r - a3 * Vec3(1, 0, 0)).norm() < 1e-15);
  CHECK((r - Vec3(0, 0, -1)).norm() < 1e-15);

  Mat3 p;
  p << 0, -1, 0,
       0, 0, -1,
       1, 0, 0;
  const Extrinsics e = yaw_only_extrinsics(std::numbers::pi / 2, Vec3(0.5, 0.2, 1.6));
  CHECK(max_abs(e.rotation - a3 * p) < 1e-15);
  // A camera yawed +90 deg (left) sees the ego +y axis straight ahead.
  const Vec3 ahead = e.apply(Vec3(0.5, 10.2, 1.6));
  CHECK(ahead.x() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ahead.y() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ahead.z() == doctest::Approx(10.0));
  CHECK((e.camera_center() - Vec3(0.5, 0.2, 1.6)).norm() < 1e-12);
}

TEST_CASE("compose with the inverse is the identity") {
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const Extrinsics e = random_camera(rng).extrinsics;
    const Extrinsics id = e.compose(e.inverse());
    CHECK(max_abs(id.rotation - Mat3::Identity()) < 1e-12);
    CHECK(id.translation.norm() < 1e-12);
    const Extrinsics id2 = e.inverse().compose(e);
    CHECK(max_abs(id2.rotation - Mat3::Identity()) < 1e-12);
    CHECK(id2.translation.norm() < 1e-12);
  }
}

TEST_CASE("euler_pose") {
  const Extrinsics z = euler_pose(0, 0, 0, Vec3::Zero());
  CHECK(max_abs(z.rotation - ego_to_level_camera()) == 0.0);

  Rng rng(17);
  for (int i = 0; i < 200; ++i) {
    const double yaw = rng.uniform(-4, 4);
    const Vec3 pos{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0, 3)};
    const Extrinsics a = euler_pose(yaw, 0, 0, pos);
    const Extrinsics b = yaw_only_extrinsics(yaw, pos);
    CHECK(max_abs(a.rotation - b.rotation) < 1e-15);
    CHECK((a.translation - b.translation).norm() < 1e-14);

    const Extrinsics r = euler_pose(yaw, rng.uniform(-1, 1), rng.uniform(-1, 1), pos);
    CHECK(max_abs(r.rotation * r.rotation.transpose() - Mat3::Identity()) < 1e-12);
    CHECK(r.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_NOTHROW(r.validate());
  }

  // Positive pitch tilts the optical axis below the horizon.
  const Vec3 axis = euler_pose(0, 0.1, 0, Vec3::Zero()).rotation.row(2).transpose();
  CHECK(axis.z() < 0.0);
  CHECK(axis.z() == doctest::Approx(-std::sin(0.1)));
}

TEST_CASE("validation") {
  CHECK_THROWS_AS((Intrinsics{0, 1000, 352, 192, 704, 384}.validate()), ValidationError);
  CHECK_THROWS_AS((Intrinsics{1000, 1000, 800, 192, 704, 384}.validate()), ValidationError);
  CHECK_THROWS_AS((Intrinsics{1000, 1000, 352, 192, 0, 384}.validate()), ValidationError);
  CHECK_NOTHROW((Intrinsics{1000, 1000, 352, 192, 704, 384}.validate()));
  Extrinsics bad;
  bad.rotation(0, 0) = 2.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  Extrinsics mirror;
  mirror.rotation(2, 2) = -1.0;
  CHECK_THROWS_AS(mirror.validate(), ValidationError);
}
