#pragma once

// Supervision targets on the render grid: center heatmaps, size attributes at
// object centers and foreground depth from boxes.

#include <optional>

#include "bevdebias/geometry.hpp"
#include "bevdebias/scene.hpp"
#include "bevdebias/tensor.hpp"

namespace bevdebias {

inline constexpr double kMinOverlap = 0.7;
inline constexpr int kMinRadius = 2;
inline constexpr double kMinCenterDepth = 0.1;

struct TargetMaps {
  Tensor heatmaps;    // (N_cls, H, W), values in [0, 1]
  Tensor attributes;  // (3, H, W): l, w, h at object centers
  Tensor attr_mask;   // (H, W), 1 at written centers
};

enum class DepthMode { box_center, surface };

struct DepthTargets {
  Tensor depth;  // (H, W), meters
  Tensor mask;   // (H, W), 1 where depth is valid
  DepthMode mode = DepthMode::box_center;
};

/// Box projected to the render grid (input pixels divided by stride).
struct ProjectedBox {
  PixelPoint center;  // u, v in render pixels; d in meters
  double width_px = 0.0;
  double height_px = 0.0;
  int radius = kMinRadius;
};

/// CenterNet minimum-overlap radius (0.7), floored to an integer and at 2 px.
[[nodiscard]] int gaussian_radius(double width_px, double height_px);

[[nodiscard]] std::optional<ProjectedBox> project_box(const Box3D& box, const CameraModel& cam,
                                                      double stride);

/// Center at render resolution, or nullopt when depth <= 0.1 m or the center
/// lies outside the frame padded by one gaussian radius.
[[nodiscard]] std::optional<PixelPoint> project_box_center(const Box3D& box,
                                                           const CameraModel& cam,
                                                           double stride);

/// Unnormalized gaussian (peak `amplitude` at the integer center) max-merged
/// into a (H, W) plane.
void draw_gaussian(std::span<double> plane, int width, int height, int cx, int cy, int radius,
                   double amplitude = 1.0);

[[nodiscard]] TargetMaps build_targets(const SceneAnnotation& scene, const CameraModel& cam,
                                       int num_classes, double stride, int width, int height);

[[nodiscard]] DepthTargets build_depth_targets(const SceneAnnotation& scene,
                                               const CameraModel& cam, double stride, int width,
                                               int height, DepthMode mode);

/// Depth (camera z) at which the ray through input pixel (u, v) enters the
/// box, if it does so in front of the camera.
[[nodiscard]] std::optional<double> ray_box_entry_depth(const Box3D& box, const CameraModel& cam,
                                                        double u, double v);

}  // namespace bevdebias
