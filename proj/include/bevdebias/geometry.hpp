#pragma once

// Pinhole cameras and rigid ego->camera transforms.
//
// Frames:
//   ego     x forward, y left, z up (meters)
//   camera  x right, y down, z forward (optical axis)
// Extrinsics map ego points into the camera frame: p_c = R * p_e + t.

#include <string>

#include <Eigen/Core>

namespace bevdebias {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct Intrinsics {
  double fu = 0.0;
  double fv = 0.0;
  double cu = 0.0;
  double cv = 0.0;
  int width = 0;
  int height = 0;

  /// Throws ValidationError unless f > 0 and the principal point lies inside the image.
  void validate() const;
};

/// Rigid transform ego -> camera.
struct Extrinsics {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Extrinsics identity() { return {}; }

  /// Throws unless rotation is orthonormal with det +1 to 1e-9.
  void validate() const;

  /// Camera-from-ego composed after `inner`: (this ∘ inner)(p) = this(inner(p)).
  [[nodiscard]] Extrinsics compose(const Extrinsics& inner) const;
  [[nodiscard]] Extrinsics inverse() const;
  [[nodiscard]] Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  /// Optical center expressed in the ego frame.
  [[nodiscard]] Vec3 camera_center() const { return -rotation.transpose() * translation; }
};

struct CameraModel {
  std::string name;
  Intrinsics intrinsics;
  Extrinsics extrinsics;
};

struct PixelPoint {
  double u = 0.0;
  double v = 0.0;
  double d = 0.0;  // depth along the optical axis
};

struct EgoPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  [[nodiscard]] Vec3 vec() const { return {x, y, z}; }
  static EgoPoint from(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
};

inline constexpr double kDegenerateDepth = 1e-9;

/// Pinhole projection. Does not require positive depth; throws
/// DegenerateProjection when |Z_c| < 1e-9.
[[nodiscard]] PixelPoint project(const EgoPoint& p, const CameraModel& cam);

/// Inverse of project for the same camera. Throws InvalidDepth when d <= 0.
[[nodiscard]] EgoPoint unproject(const PixelPoint& pix, const CameraModel& cam);

/// Axis map from ego (fwd, left, up) to a level camera looking forward
/// (right, down, fwd).
[[nodiscard]] const Mat3& ego_to_level_camera();

/// Rotation about the camera y axis exactly as written for the simplified
/// extrinsic: [[c,0,s],[0,1,0],[-s,0,c]].
[[nodiscard]] Mat3 level_yaw_rotation(double theta);

/// Level camera yawed by theta (counter-clockwise about ego z) with optical
/// center at `position` in the ego frame. Rotation = level_yaw_rotation(theta) * P.
[[nodiscard]] Extrinsics yaw_only_extrinsics(double theta, const Vec3& position);

/// Camera mount with intrinsic Z(yaw)-Y(pitch)-X(roll) body rotation in the
/// ego frame and optical center at `position`. Positive pitch tilts the
/// optical axis down; with pitch = roll = 0 this equals yaw_only_extrinsics.
[[nodiscard]] Extrinsics euler_pose(double yaw, double pitch, double roll, const Vec3& position);

/// Body rotation Rz(yaw) * Ry(pitch) * Rx(roll).
[[nodiscard]] Mat3 body_rotation(double yaw, double pitch, double roll);

}  // namespace bevdebias
