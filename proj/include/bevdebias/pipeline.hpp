#pragma once

// End-to-end runs over simulated scenes: simulate, lift, render, build
// targets, evaluate losses and metrics, and write every artifact plus a
// hashed manifest.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bevdebias/bias_model.hpp"
#include "bevdebias/io.hpp"
#include "bevdebias/losses.hpp"
#include "bevdebias/metrics.hpp"
#include "bevdebias/render.hpp"
#include "bevdebias/simulator.hpp"

namespace bevdebias {

/// Labeled source data (lambda_s = 1) or unlabeled target data (lambda_t = 1).
enum class Domain { source, target };

[[nodiscard]] Domain parse_domain(std::string_view name);
[[nodiscard]] std::string_view domain_name(Domain d);
[[nodiscard]] LossWeights weights_for(Domain d);

struct RunConfig {
  Domain domain = Domain::source;
  std::string source_preset = "nuscenes";
  std::string target_preset = "lyft";
  std::optional<std::vector<CameraModel>> custom_rig;  // used by preset "custom"
  std::uint64_t seed = 0;
  int scenes = 2;
  SceneSpec scene;
  GridSpec grid;
  BevEncoding encoding = BevEncoding::center;
  double blob_sigma = 0.15;
  RenderConfig render;
  double stride = 8.0;
  PosePerturbation perturbation;
  double tau = kDefaultTau;
  double virtual_unit = kDefaultVirtualUnit;
  std::size_t depth_bins = 60;
  double depth_bin_sigma = 1.0;  // spread of the simulated depth prediction, in bins
  PseudoNoise pseudo{0.05, 0.0, 0.0};
  BiasDecomposition bias{0.5, Vec3{0.5, 0.0, 0.0}};  // applied in the target domain
  std::vector<double> thresholds = default_thresholds();
  int eval_class = 0;
  std::filesystem::path out_dir = "out";

  void validate() const;
};

[[nodiscard]] Json config_to_json(const RunConfig& cfg);

/// Overlays the keys present in `j` onto `base`. Unknown keys are rejected.
[[nodiscard]] RunConfig config_from_json(const Json& j, RunConfig base = {});

[[nodiscard]] std::vector<CameraModel> domain_rig(const RunConfig& cfg, Domain d);

/// Seed of scene `index` of a run.
[[nodiscard]] std::uint64_t scene_seed(std::uint64_t run_seed, int index);

[[nodiscard]] SceneAnnotation simulate_scene(const RunConfig& cfg, Domain d, int index);

/// Class heatmaps and (l, w, h) maps rendered from a volume.
struct RenderedHeads {
  Tensor heatmaps;    // (N_cls, H, W)
  Tensor attributes;  // (3, H, W)
};

[[nodiscard]] IFVolume build_volume(const std::vector<Box3D>& boxes, const RunConfig& cfg);

[[nodiscard]] RenderedHeads render_heads(const IFVolume& vol, const CameraModel& cam,
                                         const RunConfig& cfg);

/// Per-camera tensors of one scene, stacked along a leading camera axis.
struct SceneArtifacts {
  Tensor rendered;   // (N_cam, N_cls, H, W)
  Tensor targets;    // (N_cam, N_cls, H, W)
  Tensor pseudo_2d;  // (N_cam, N_cls, H, W)
  Tensor depth;      // (N_cam, H, W), 0 where invalid
  IFVolume volume;
  std::vector<Detection> detections;
};

/// L_render, L_pg and L_ps averaged over the scene's cameras. Rendering uses
/// perturbed poses with targets built for the same perturbed poses.
[[nodiscard]] LossReport source_losses(const SceneAnnotation& scene, const RunConfig& cfg,
                                       SceneArtifacts* artifacts = nullptr);

/// L_con averaged over cameras: heatmaps rendered from a BEV built on the
/// biased detector's boxes against sharpened 2D pseudo labels.
[[nodiscard]] LossReport target_losses(const SceneAnnotation& scene, const RunConfig& cfg,
                                       SceneArtifacts* artifacts = nullptr);

/// Mean over cameras of consistency_loss(render(bev_boxes), pseudo_2d(scene)).
[[nodiscard]] double scene_consistency(const SceneAnnotation& scene,
                                       const std::vector<Box3D>& bev_boxes,
                                       const RunConfig& cfg, const PseudoNoise& noise);

struct RunReport {
  LossReport losses;
  MetricsReport metrics;
  Json manifest;
  std::filesystem::path manifest_path;
};

/// Writes config, per-scene artifacts, losses, metrics and manifest.json
/// under cfg.out_dir.
RunReport run_pipeline(const RunConfig& cfg);

/// {"format_version", "artifacts": [{"path", "bytes", "sha256"}...], ...extra}
/// over every regular file below `dir` except the manifest itself, sorted by
/// relative path.
[[nodiscard]] Json build_manifest(const std::filesystem::path& dir, const Json& extra);

}  // namespace bevdebias
