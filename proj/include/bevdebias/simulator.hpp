#pragma once

// Deterministic synthetic scenes: camera rig presets, box placement, idealized
// BEV features and height logits, noisy 2D detector heatmaps and a biased
// detector model.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bevdebias/bias_model.hpp"
#include "bevdebias/ifv.hpp"
#include "bevdebias/metrics.hpp"
#include "bevdebias/rng.hpp"
#include "bevdebias/scene.hpp"
#include "bevdebias/tensor.hpp"

namespace bevdebias {

enum class RigPreset { nuscenes, deepaccident, lyft, custom };

[[nodiscard]] RigPreset parse_preset(std::string_view name);
[[nodiscard]] std::string_view preset_name(RigPreset p);

inline constexpr int kInputWidth = 704;
inline constexpr int kInputHeight = 384;
inline constexpr double kRigHeight = 1.6;
inline constexpr double kRigRadius = 0.5;

/// Six level cameras at 60 degree yaw spacing (front first, counter-clockwise)
/// with per-dataset focal lengths rescaled to the 704x384 input. Throws for
/// `custom`, which has no built-in layout.
[[nodiscard]] std::vector<CameraModel> make_rig(RigPreset preset);

struct SceneSpec {
  int min_boxes = 1;
  int max_boxes = 8;
  double length_lo = 3.8, length_hi = 5.2;
  double width_lo = 1.7, width_hi = 2.1;
  double height_lo = 1.4, height_hi = 1.9;
  double x_min = -40.0, x_max = 40.0;
  double y_min = -40.0, y_max = 40.0;
  double min_range = 4.0;  // keep boxes clear of the rig
  double min_separation = 1.0;
  int num_classes = 1;
  std::uint64_t seed = 0;

  /// Throws ValidationError on inconsistent ranges or a region outside `grid`.
  void validate(const GridSpec& grid) const;
};

struct DomainShiftSpec {
  RigPreset preset = RigPreset::nuscenes;
  std::optional<BiasDecomposition> bias;
};

inline constexpr int kMaxRejections = 10000;

/// Throws OvercrowdedSpec when a box cannot be placed within kMaxRejections
/// draws.
[[nodiscard]] SceneAnnotation generate_scene(const SceneSpec& spec,
                                             const std::vector<CameraModel>& rig);

enum class BevEncoding {
  footprint,  // 1 under the box footprint, logits +-10 by height overlap
  center,     // oriented gaussian blob around the center, gaussian height logits
};

struct BevSynthConfig {
  GridSpec grid;
  BevEncoding encoding = BevEncoding::center;
  int num_classes = 1;
  bool attributes = false;  // append (l, w, h) * occupancy channels
  double blob_sigma = 0.15;  // center encoding: gaussian sigma as a fraction of l, w, h
};

inline constexpr double kHeightLogit = 10.0;

[[nodiscard]] std::pair<BEVGrid, HeightLogits> synthesize_bev(const std::vector<Box3D>& boxes,
                                                              const BevSynthConfig& cfg);

struct PseudoNoise {
  double score_sigma = 0.0;
  double fn_rate = 0.0;  // probability a box is dropped
  double fp_rate = 0.0;  // probability a kept box spawns a spurious peak

  void validate() const;
};

/// Heatmaps (N_cls, H, W) a 2D detector would produce for `cam`. With zero
/// noise this equals build_targets(...).heatmaps exactly.
[[nodiscard]] Tensor synthesize_pseudo_2d(const SceneAnnotation& scene, const CameraModel& cam,
                                          const PseudoNoise& noise, Rng& rng, int num_classes,
                                          double stride, int width, int height);

/// Index of the camera whose optical axis is angularly closest to p.
[[nodiscard]] std::size_t nearest_camera(const EgoPoint& p, const std::vector<CameraModel>& rig);

/// Boxes as reported by a detector with the given bias: depth error along the
/// ray of the nearest camera, then the ego-frame offset.
[[nodiscard]] std::vector<Box3D> inject_bias(const std::vector<Box3D>& boxes,
                                             const BiasDecomposition& bias,
                                             const std::vector<CameraModel>& rig);

[[nodiscard]] std::vector<Detection> as_detections(const std::vector<Box3D>& boxes,
                                                   double score = 1.0);

}  // namespace bevdebias
