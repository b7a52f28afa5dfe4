#include "bevdebias/geometry.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "bevdebias/error.hpp"

namespace bevdebias {

void Intrinsics::validate() const {
  if (!(fu > 0.0) || !(fv > 0.0)) {
    throw ValidationError("intrinsics: focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw ValidationError("intrinsics: image size must be positive");
  }
  if (!(cu > 0.0 && cu < width) || !(cv > 0.0 && cv < height)) {
    std::ostringstream os;
    os << "intrinsics: principal point (" << cu << ", " << cv << ") outside " << width << "x"
       << height;
    throw ValidationError(os.str());
  }
}

void Extrinsics::validate() const {
  const double orth = (rotation * rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
  const double det = rotation.determinant();
  if (!(orth <= 1e-9) || !(std::abs(det - 1.0) <= 1e-9)) {
    throw ValidationError("extrinsics: rotation is not a proper orthonormal matrix");
  }
  if (!translation.allFinite()) {
    throw ValidationError("extrinsics: non-finite translation");
  }
}

Extrinsics Extrinsics::compose(const Extrinsics& inner) const {
  return {rotation * inner.rotation, rotation * inner.translation + translation};
}

Extrinsics Extrinsics::inverse() const {
  const Mat3 rt = rotation.transpose();
  return {rt, -rt * translation};
}

PixelPoint project(const EgoPoint& p, const CameraModel& cam) {
  const Vec3 pc = cam.extrinsics.apply(p.vec());
  if (std::abs(pc.z()) < kDegenerateDepth) {
    throw DegenerateProjection("project: point lies on the camera plane (|Z_c| < 1e-9)");
  }
  const auto& k = cam.intrinsics;
  return {k.fu * pc.x() / pc.z() + k.cu, k.fv * pc.y() / pc.z() + k.cv, pc.z()};
}

EgoPoint unproject(const PixelPoint& pix, const CameraModel& cam) {
  if (!(pix.d > 0.0)) {
    throw InvalidDepth("unproject: depth must be positive");
  }
  const auto& k = cam.intrinsics;
  const Vec3 pc{(pix.u - k.cu) * pix.d / k.fu, (pix.v - k.cv) * pix.d / k.fv, pix.d};
  const auto& e = cam.extrinsics;
  return EgoPoint::from(e.rotation.transpose() * (pc - e.translation));
}

const Mat3& ego_to_level_camera() {
  static const Mat3 p = [] {
    Mat3 m;
    m << 0, -1, 0,
         0, 0, -1,
         1, 0, 0;
    return m;
  }();
  return p;
}

Mat3 level_yaw_rotation(double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Mat3 r;
  r << c, 0, s,
       0, 1, 0,
       -s, 0, c;
  return r;
}

Extrinsics yaw_only_extrinsics(double theta, const Vec3& position) {
  const Mat3 r = level_yaw_rotation(theta) * ego_to_level_camera();
  return {r, -r * position};
}

Mat3 body_rotation(double yaw, double pitch, double roll) {
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const double cr = std::cos(roll), sr = std::sin(roll);
  Mat3 rz, ry, rx;
  rz << cy, -sy, 0,
        sy, cy, 0,
        0, 0, 1;
  ry << cp, 0, sp,
        0, 1, 0,
        -sp, 0, cp;
  rx << 1, 0, 0,
        0, cr, -sr,
        0, sr, cr;
  return rz * ry * rx;
}

Extrinsics euler_pose(double yaw, double pitch, double roll, const Vec3& position) {
  const Mat3 r = ego_to_level_camera() * body_rotation(yaw, pitch, roll).transpose();
  return {r, -r * position};
}

}  // namespace bevdebias
