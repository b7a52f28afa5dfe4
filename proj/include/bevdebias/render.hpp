#pragma once

// Multi-view semantic rendering: perturb a camera, cast one ray per render
// pixel and sum trilinear volume samples taken at equally spaced depths.

#include <vector>

#include "bevdebias/geometry.hpp"
#include "bevdebias/ifv.hpp"
#include "bevdebias/rng.hpp"
#include "bevdebias/tensor.hpp"

namespace bevdebias {

/// Half-widths of the uniform perturbation applied to a camera pose.
struct PosePerturbation {
  Vec3 d_pos{0.5, 0.5, 0.25};  // meters, ego x/y/z
  double d_yaw = 0.2;          // radians
  double d_pitch = 0.04;
  double d_roll = 0.04;

  void validate() const;
};

struct RenderConfig {
  int width = 88;
  int height = 48;
  int samples = 64;
  double near = 1.0;
  double far = 61.2;

  void validate() const;
};

struct RayBundle {
  CameraModel camera;
  int width = 0;
  int height = 0;
  int samples = 0;
  double near = 0.0;
  double far = 0.0;
  Vec3 origin = Vec3::Zero();    // optical center, ego frame
  std::vector<Vec3> directions;  // unit, ego frame, row-major (h, w)

  /// Sample spacing in meters along each ray.
  [[nodiscard]] double step() const { return (far - near) / samples; }
  /// Distance from the origin to sample i along a ray.
  [[nodiscard]] double sample_depth(int i) const { return near + (i + 0.5) * step(); }
};

struct RenderedFeatureMap {
  Tensor features;  // (C, H, W)
  CameraModel camera;
};

/// Each of the six pose components is drawn from U[-range, +range] and
/// applied in the camera's own body frame; intrinsics are untouched.
/// Draw order: dx, dy, dz, yaw, pitch, roll.
[[nodiscard]] CameraModel perturb_pose(const CameraModel& cam, const PosePerturbation& pert,
                                       Rng& rng);

/// One ray per render pixel through the input-resolution pixel center
/// ((w + 0.5) * width / W, (h + 0.5) * height / H).
[[nodiscard]] RayBundle make_rays(const CameraModel& cam, const RenderConfig& cfg);

/// Trilinear sample of every channel at p; zero outside the grid bounds.
void sample_volume(const IFVolume& vol, const Vec3& p, std::span<double> out);

/// F(w,h) = sum_i V(origin + sample_depth(i) * dir(w,h)), no compositing and
/// no 1/n normalization. Every ray gets the same metric spacing, so off-axis
/// pixels are not down-weighted.
[[nodiscard]] RenderedFeatureMap render_view(const IFVolume& vol, const RayBundle& rays);

/// Rendered class heatmap in [0, 1): 1 - exp(-F) applied to the first
/// `classes` channels. Monotone, so argmax is unchanged.
[[nodiscard]] Tensor heatmap_readout(const RenderedFeatureMap& map, std::size_t classes);

/// Rendered (l, w, h): attribute channels divided by the summed class
/// channels; zero where the class response is below `min_response`.
[[nodiscard]] Tensor attribute_readout(const RenderedFeatureMap& map, std::size_t classes,
                                       double min_response = 1e-6);

}  // namespace bevdebias
