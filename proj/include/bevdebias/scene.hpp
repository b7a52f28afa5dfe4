#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "bevdebias/geometry.hpp"

namespace bevdebias {

/// Oriented 3D box in the ego frame. Length runs along the heading (yaw about
/// ego z), width along the left axis, height along z.
struct Box3D {
  EgoPoint center;
  Vec3 size{4.5, 1.9, 1.6};  // length, width, height
  double yaw = 0.0;
  int class_id = 0;

  void validate() const;
  [[nodiscard]] Mat3 axes() const;  // columns: length, width, height directions
  [[nodiscard]] std::array<Vec3, 8> corners() const;
};

struct SceneAnnotation {
  std::vector<Box3D> boxes;
  std::vector<CameraModel> rig;
  std::uint64_t seed = 0;
};

}  // namespace bevdebias
