#pragma once

// Closed-form perspective bias of a re-projected detection, and a brute-force
// re-projection oracle for it.
//
// A detector reports L = L_gt + dL_img + dL_bev: the image encoder errs in
// depth along the viewing ray (dl_img) and the BEV encoder adds a metric
// offset (dl_bev, ego frame). Re-projecting L into the camera that produced
// it shifts the pixel by
//
//   du = (k_u (u - c_u) + b_u) / d,   dv = (k_v (v - c_v) + b_v) / d
//
// which is exact for a level camera yawed by theta with square pixels.

#include "bevdebias/geometry.hpp"

namespace bevdebias {

struct BiasDecomposition {
  double dl_img = 0.0;      // depth error of the image encoder, meters
  Vec3 dl_bev = Vec3::Zero();  // ego-frame offset of the BEV encoder, meters
};

struct BiasCoefficients {
  double k_u = 0.0;
  double b_u = 0.0;
  double k_v = 0.0;
  double b_v = 0.0;
  double denom_depth = 0.0;
};

struct PixelShift {
  double du = 0.0;
  double dv = 0.0;
};

inline constexpr double kSingularCos = 1e-9;
inline constexpr double kDegenerateDenom = 1e-9;

/// dl_bev expressed in the frame of the simplified extrinsic (x right,
/// y down, z forward of the un-yawed camera).
[[nodiscard]] Vec3 to_level_frame(const Vec3& ego_offset);

/// Coefficients for a yaw-only camera with focal f and ground-truth depth d_gt.
/// Throws SingularView when |cos theta| <= 1e-9 and DegenerateBias when the
/// denominator depth is within 1e-9 of zero.
[[nodiscard]] BiasCoefficients bias_coefficients(const BiasDecomposition& bias, double theta,
                                                 double f, double d_gt);

/// Same as above for a concrete camera. Throws ValidationError when the camera
/// is outside the closed form's domain (non-square pixels, pitch or roll).
[[nodiscard]] BiasCoefficients bias_coefficients(const BiasDecomposition& bias,
                                                 const CameraModel& cam, double d_gt);

/// Yaw of a level camera, recovered from its rotation. Throws ValidationError
/// when the rotation is not of the yaw-only form to 1e-9.
[[nodiscard]] double level_camera_yaw(const Extrinsics& e);

[[nodiscard]] PixelShift analytic_bias(const BiasCoefficients& coeffs, double u, double v,
                                       double cu, double cv);

/// Numerical re-projection: project, lift at the biased depth, offset in the
/// ego frame, project again. Valid for any camera.
[[nodiscard]] PixelShift oracle_bias(const EgoPoint& p_gt, const BiasDecomposition& bias,
                                     const CameraModel& cam);

/// Ego-frame location the biased detector would report for p_gt seen by cam.
[[nodiscard]] EgoPoint biased_location(const EgoPoint& p_gt, const BiasDecomposition& bias,
                                       const CameraModel& cam);

}  // namespace bevdebias
