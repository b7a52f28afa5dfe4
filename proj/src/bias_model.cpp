#include "bevdebias/bias_model.hpp"

#include <cmath>

#include "bevdebias/error.hpp"

namespace bevdebias {

Vec3 to_level_frame(const Vec3& ego_offset) { return ego_to_level_camera() * ego_offset; }

BiasCoefficients bias_coefficients(const BiasDecomposition& bias, double theta, double f,
                                   double d_gt) {
  if (!(f > 0.0)) {
    throw ValidationError("bias_coefficients: focal length must be positive");
  }
  const double c = std::cos(theta);
  if (std::abs(c) <= kSingularCos) {
    throw SingularView("bias_coefficients: camera yaw too close to +-pi/2");
  }
  const double tan_t = std::tan(theta);
  const double sec_t = 1.0 / c;
  const Vec3 l = to_level_frame(bias.dl_bev);
  const double lx = l.x(), ly = l.y(), lz = l.z();

  BiasCoefficients out;
  out.k_u = lx * tan_t - lz;
  out.b_u = lx * f + lz * f * tan_t;
  out.k_v = out.k_u;
  out.b_v = ly * f * sec_t;
  out.denom_depth = (d_gt + bias.dl_img) * sec_t + lz - lx * tan_t;
  if (std::abs(out.denom_depth) <= kDegenerateDenom) {
    throw DegenerateBias("bias_coefficients: denominator depth vanishes");
  }
  return out;
}

double level_camera_yaw(const Extrinsics& e) {
  // R = Ry(theta) * P  =>  R * P^T = Ry(theta)
  const Mat3 ry = e.rotation * ego_to_level_camera().transpose();
  const double theta = std::atan2(ry(0, 2), ry(0, 0));
  if ((ry - level_yaw_rotation(theta)).cwiseAbs().maxCoeff() > 1e-9) {
    throw ValidationError("bias model: camera has pitch or roll; closed form does not apply");
  }
  return theta;
}

BiasCoefficients bias_coefficients(const BiasDecomposition& bias, const CameraModel& cam,
                                   double d_gt) {
  const auto& k = cam.intrinsics;
  if (k.fu != k.fv) {
    throw ValidationError("bias model: closed form requires square pixels (fu == fv)");
  }
  return bias_coefficients(bias, level_camera_yaw(cam.extrinsics), k.fu, d_gt);
}

PixelShift analytic_bias(const BiasCoefficients& coeffs, double u, double v, double cu,
                         double cv) {
  return {(coeffs.k_u * (u - cu) + coeffs.b_u) / coeffs.denom_depth,
          (coeffs.k_v * (v - cv) + coeffs.b_v) / coeffs.denom_depth};
}

EgoPoint biased_location(const EgoPoint& p_gt, const BiasDecomposition& bias,
                         const CameraModel& cam) {
  const PixelPoint gt = project(p_gt, cam);
  const EgoPoint lifted = unproject({gt.u, gt.v, gt.d + bias.dl_img}, cam);
  return EgoPoint::from(lifted.vec() + bias.dl_bev);
}

PixelShift oracle_bias(const EgoPoint& p_gt, const BiasDecomposition& bias,
                       const CameraModel& cam) {
  const PixelPoint gt = project(p_gt, cam);
  const PixelPoint moved = project(biased_location(p_gt, bias, cam), cam);
  return {moved.u - gt.u, moved.v - gt.v};
}

}  // namespace bevdebias
