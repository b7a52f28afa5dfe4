#pragma once

// Center-distance detection metrics and the NDS* aggregate (mAP plus the
// translation, scale and orientation errors; velocity and attribute errors
// are not part of it).

#include <optional>
#include <span>
#include <vector>

#include "bevdebias/scene.hpp"

namespace bevdebias {

struct Detection {
  Box3D box;
  double score = 1.0;

  void validate() const;
};

/// matched_gt[i] is the gt index matched by detection i, or nullopt.
struct Matching {
  std::vector<std::optional<std::size_t>> matched_gt;
  std::vector<std::size_t> order;  // detection indices by descending score
};

/// Detections and ground truth of one scene.
struct EvalFrame {
  std::vector<Detection> detections;
  std::vector<Box3D> ground_truth;
};

struct ThresholdAP {
  double threshold = 0.0;
  double ap = 0.0;
};

struct MetricsReport {
  double mAP = 0.0;
  double mATE = 1.0;
  double mASE = 1.0;
  double mAOE = 1.0;
  double nds_star = 0.0;
  std::vector<ThresholdAP> ap_table;
  std::size_t num_detections = 0;
  std::size_t num_ground_truth = 0;
  std::size_t num_tp_matches = 0;
};

inline constexpr double kTpThreshold = 2.0;

[[nodiscard]] std::vector<double> default_thresholds();

[[nodiscard]] double bev_distance(const Box3D& a, const Box3D& b);

/// Greedy by descending score (ties keep input order): each detection takes
/// the nearest unmatched gt of its class within `threshold` meters in BEV.
[[nodiscard]] Matching match_detections(std::span<const Detection> dets,
                                        std::span<const Box3D> gts, double threshold);

/// 101-point interpolated AP of one threshold, pooled over frames.
[[nodiscard]] double average_precision(std::span<const EvalFrame> frames, double threshold);

struct TpErrors {
  double mATE = 1.0;
  double mASE = 1.0;
  double mAOE = 1.0;
  std::size_t matches = 0;
};

/// Errors over matches at kTpThreshold; each error is 1 when nothing matches.
[[nodiscard]] TpErrors tp_errors(std::span<const EvalFrame> frames,
                                 double threshold = kTpThreshold);

/// 1 - IoU of two boxes sharing center and orientation.
[[nodiscard]] double scale_error(const Vec3& size_a, const Vec3& size_b);

/// |yaw_a - yaw_b| wrapped to [0, pi], divided by pi.
[[nodiscard]] double orientation_error(double yaw_a, double yaw_b);

/// (3 mAP + sum(1 - min(1, tp))) / 6. Throws ValidationError unless exactly
/// three TP errors are given.
[[nodiscard]] double nds_star(double mAP, std::span<const double> tp);

/// Full report restricted to `class_id` (detections and gts of other classes
/// are dropped).
[[nodiscard]] MetricsReport evaluate(std::span<const EvalFrame> frames, int class_id,
                                     std::span<const double> thresholds);

}  // namespace bevdebias
