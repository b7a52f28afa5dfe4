#include "bevdebias/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include "bevdebias/error.hpp"
#include "bevdebias/image.hpp"
#include "bevdebias/targets.hpp"

namespace bevdebias {

namespace fs = std::filesystem;

Domain parse_domain(std::string_view name) {
  if (name == "source") return Domain::source;
  if (name == "target") return Domain::target;
  throw ValidationError("unknown domain '" + std::string(name) + "' (expected source|target)");
}

std::string_view domain_name(Domain d) { return d == Domain::source ? "source" : "target"; }

LossWeights weights_for(Domain d) {
  return d == Domain::source ? LossWeights::source() : LossWeights::target();
}

void RunConfig::validate() const {
  if (scenes < 1) {
    throw ValidationError("config: scenes must be >= 1");
  }
  grid.validate();
  scene.validate(grid);
  render.validate();
  perturbation.validate();
  pseudo.validate();
  if (!(stride > 0.0) || !(blob_sigma > 0.0)) {
    throw ValidationError("config: stride and blob sigma must be positive");
  }
  if (!(tau > 0.0 && tau < 1.0)) {
    throw ValidationError("config: tau must lie in (0, 1)");
  }
  if (!(virtual_unit > 0.0) || depth_bins < 1 || !(depth_bin_sigma > 0.0)) {
    throw ValidationError("config: virtual unit, bin count and bin sigma must be positive");
  }
  if (thresholds.empty() || std::any_of(thresholds.begin(), thresholds.end(),
                                        [](double t) { return !(t > 0.0); })) {
    throw ValidationError("config: thresholds must be positive and non-empty");
  }
  if (eval_class < 0 || eval_class >= scene.num_classes) {
    throw ValidationError("config: eval class out of range");
  }
  for (const auto& name : {source_preset, target_preset}) {
    if (parse_preset(name) == RigPreset::custom && !custom_rig) {
      throw ValidationError("config: preset 'custom' requires a rig");
    }
  }
}

Json config_to_json(const RunConfig& c) {
  const auto v3 = [](const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); };
  Json j = {
      {"format_version", kFormatVersion},
      {"domain", domain_name(c.domain)},
      {"source_preset", c.source_preset},
      {"target_preset", c.target_preset},
      {"seed", c.seed},
      {"scenes", c.scenes},
      {"scene",
       {{"min_boxes", c.scene.min_boxes}, {"max_boxes", c.scene.max_boxes},
        {"length", {c.scene.length_lo, c.scene.length_hi}},
        {"width", {c.scene.width_lo, c.scene.width_hi}},
        {"height", {c.scene.height_lo, c.scene.height_hi}},
        {"x_range", {c.scene.x_min, c.scene.x_max}},
        {"y_range", {c.scene.y_min, c.scene.y_max}},
        {"min_range", c.scene.min_range}, {"min_separation", c.scene.min_separation},
        {"num_classes", c.scene.num_classes}}},
      {"grid", grid_to_json(c.grid)},
      {"encoding", c.encoding == BevEncoding::center ? "center" : "footprint"},
      {"blob_sigma", c.blob_sigma},
      {"render",
       {{"width", c.render.width}, {"height", c.render.height}, {"samples", c.render.samples},
        {"near", c.render.near}, {"far", c.render.far}}},
      {"stride", c.stride},
      {"perturbation",
       {{"d_pos", v3(c.perturbation.d_pos)}, {"d_yaw", c.perturbation.d_yaw},
        {"d_pitch", c.perturbation.d_pitch}, {"d_roll", c.perturbation.d_roll}}},
      {"tau", c.tau},
      {"virtual_unit", c.virtual_unit},
      {"depth_bins", c.depth_bins},
      {"depth_bin_sigma", c.depth_bin_sigma},
      {"pseudo",
       {{"score_sigma", c.pseudo.score_sigma}, {"fn_rate", c.pseudo.fn_rate},
        {"fp_rate", c.pseudo.fp_rate}}},
      {"bias", {{"dl_img", c.bias.dl_img}, {"dl_bev", v3(c.bias.dl_bev)}}},
      {"thresholds", c.thresholds},
      {"eval_class", c.eval_class},
  };
  if (c.custom_rig) {
    j["rig"] = rig_to_json(*c.custom_rig);
  }
  return j;
}

namespace {

using Handler = std::function<void(const Json&)>;

void overlay(const Json& j, const std::string& what, const std::map<std::string, Handler>& keys) {
  if (!j.is_object()) {
    throw FormatError("config: '" + what + "' must be an object");
  }
  for (const auto& [key, value] : j.items()) {
    const auto it = keys.find(key);
    if (it == keys.end()) {
      throw FormatError("config: unknown key '" + what + "." + key + "'");
    }
    try {
      it->second(value);
    } catch (const Json::exception& e) {
      throw FormatError("config: bad value for '" + what + "." + key + "': " + e.what());
    }
  }
}

template <typename T>
Handler set(T& slot) {
  return [&slot](const Json& v) { slot = v.get<T>(); };
}

Handler set_pair(double& lo, double& hi) {
  return [&lo, &hi](const Json& v) {
    const auto p = v.get<std::vector<double>>();
    if (p.size() != 2) {
      throw FormatError("config: expected a [lo, hi] pair");
    }
    lo = p[0];
    hi = p[1];
  };
}

Handler set_vec3(Vec3& slot) {
  return [&slot](const Json& v) {
    const auto p = v.get<std::vector<double>>();
    if (p.size() != 3) {
      throw FormatError("config: expected three components");
    }
    slot = {p[0], p[1], p[2]};
  };
}

}  // namespace

RunConfig config_from_json(const Json& j, RunConfig c) {
  if (j.contains("format_version")) {
    check_format_version(j, "config");
  }
  auto& s = c.scene;
  auto& g = c.grid;
  auto& r = c.render;
  auto& p = c.perturbation;
  overlay(j, "config",
          {{"format_version", [](const Json&) {}},
           {"domain", [&](const Json& v) { c.domain = parse_domain(v.get<std::string>()); }},
           {"source_preset", set(c.source_preset)},
           {"target_preset", set(c.target_preset)},
           {"rig", [&](const Json& v) { c.custom_rig = rig_from_json(v); }},
           {"seed", set(c.seed)},
           {"scenes", set(c.scenes)},
           {"scene",
            [&](const Json& v) {
              overlay(v, "scene",
                      {{"min_boxes", set(s.min_boxes)},
                       {"max_boxes", set(s.max_boxes)},
                       {"length", set_pair(s.length_lo, s.length_hi)},
                       {"width", set_pair(s.width_lo, s.width_hi)},
                       {"height", set_pair(s.height_lo, s.height_hi)},
                       {"x_range", set_pair(s.x_min, s.x_max)},
                       {"y_range", set_pair(s.y_min, s.y_max)},
                       {"min_range", set(s.min_range)},
                       {"min_separation", set(s.min_separation)},
                       {"num_classes", set(s.num_classes)}});
            }},
           {"grid",
            [&](const Json& v) {
              overlay(v, "grid",
                      {{"x_range", set_pair(g.x_min, g.x_max)},
                       {"y_range", set_pair(g.y_min, g.y_max)},
                       {"z_range", set_pair(g.z_min, g.z_max)},
                       {"cell_size", set(g.cell_size)},
                       {"nz", set(g.nz)}});
            }},
           {"encoding",
            [&](const Json& v) {
              const auto name = v.get<std::string>();
              if (name != "center" && name != "footprint") {
                throw FormatError("config: encoding must be center or footprint");
              }
              c.encoding = name == "center" ? BevEncoding::center : BevEncoding::footprint;
            }},
           {"blob_sigma", set(c.blob_sigma)},
           {"render",
            [&](const Json& v) {
              overlay(v, "render",
                      {{"width", set(r.width)},
                       {"height", set(r.height)},
                       {"samples", set(r.samples)},
                       {"near", set(r.near)},
                       {"far", set(r.far)}});
            }},
           {"stride", set(c.stride)},
           {"perturbation",
            [&](const Json& v) {
              overlay(v, "perturbation",
                      {{"d_pos", set_vec3(p.d_pos)},
                       {"d_yaw", set(p.d_yaw)},
                       {"d_pitch", set(p.d_pitch)},
                       {"d_roll", set(p.d_roll)}});
            }},
           {"tau", set(c.tau)},
           {"virtual_unit", set(c.virtual_unit)},
           {"depth_bins", set(c.depth_bins)},
           {"depth_bin_sigma", set(c.depth_bin_sigma)},
           {"pseudo",
            [&](const Json& v) {
              overlay(v, "pseudo",
                      {{"score_sigma", set(c.pseudo.score_sigma)},
                       {"fn_rate", set(c.pseudo.fn_rate)},
                       {"fp_rate", set(c.pseudo.fp_rate)}});
            }},
           {"bias",
            [&](const Json& v) {
              overlay(v, "bias",
                      {{"dl_img", set(c.bias.dl_img)}, {"dl_bev", set_vec3(c.bias.dl_bev)}});
            }},
           {"thresholds", set(c.thresholds)},
           {"eval_class", set(c.eval_class)}});
  return c;
}

std::vector<CameraModel> domain_rig(const RunConfig& cfg, Domain d) {
  const RigPreset preset =
      parse_preset(d == Domain::source ? cfg.source_preset : cfg.target_preset);
  if (preset == RigPreset::custom) {
    if (!cfg.custom_rig) {
      throw ValidationError("preset 'custom' requires a rig");
    }
    return *cfg.custom_rig;
  }
  return make_rig(preset);
}

std::uint64_t scene_seed(std::uint64_t run_seed, int index) {
  return Rng::stream(run_seed, 1000 + static_cast<std::uint64_t>(index)).next_u64();
}

SceneAnnotation simulate_scene(const RunConfig& cfg, Domain d, int index) {
  SceneSpec spec = cfg.scene;
  spec.seed = scene_seed(cfg.seed, index);
  spec.validate(cfg.grid);
  return generate_scene(spec, domain_rig(cfg, d));
}

IFVolume build_volume(const std::vector<Box3D>& boxes, const RunConfig& cfg) {
  BevSynthConfig synth{cfg.grid, cfg.encoding, cfg.scene.num_classes, true, cfg.blob_sigma};
  const auto [bev, logits] = synthesize_bev(boxes, synth);
  return lift_to_ifv(bev, logits);
}

RenderedHeads render_heads(const IFVolume& vol, const CameraModel& cam, const RunConfig& cfg) {
  const RenderedFeatureMap map = render_view(vol, make_rays(cam, cfg.render));
  const auto classes = static_cast<std::size_t>(cfg.scene.num_classes);
  return {heatmap_readout(map, classes), attribute_readout(map, classes)};
}

namespace {

void check_render_grid(const CameraModel& cam, const RunConfig& cfg) {
  const double w = cfg.render.width * cfg.stride;
  const double h = cfg.render.height * cfg.stride;
  if (std::abs(w - cam.intrinsics.width) > 1e-9 || std::abs(h - cam.intrinsics.height) > 1e-9) {
    throw ValidationError("render grid times stride must equal the input resolution of " +
                          cam.name);
  }
}

/// Stacks per-camera (…) tensors into (N_cam, …).
Tensor stack(const std::vector<Tensor>& parts) {
  if (parts.empty()) {
    return {};
  }
  std::vector<std::size_t> shape{parts.size()};
  shape.insert(shape.end(), parts[0].shape().begin(), parts[0].shape().end());
  Tensor out(shape);
  std::size_t k = 0;
  for (const Tensor& t : parts) {
    for (const double v : t.data()) {
      out[k++] = v;
    }
  }
  return out;
}

Rng camera_stream(const SceneAnnotation& scene, std::uint64_t base, std::size_t cam) {
  return Rng::stream(scene.seed, base + cam);
}

constexpr std::uint64_t kPerturbStream = 100;
constexpr std::uint64_t kPseudoStream = 200;
constexpr std::uint64_t kScoreStream = 300;

/// Simulated depth head output: a gaussian bump over bins centered at the
/// (possibly biased) virtual depth of every valid pixel.
Tensor simulated_depth_prediction(const DepthTargets& dt, const CameraModel& cam,
                                  const VirtualDepthBins& bins, const RunConfig& cfg,
                                  double dl_img) {
  const std::size_t h = dt.depth.dim(0), w = dt.depth.dim(1), plane = h * w;
  Tensor pred({bins.count, h, w});
  for (std::size_t pix = 0; pix < plane; ++pix) {
    if (dt.mask[pix] == 0.0) {
      continue;
    }
    const double d = std::max(0.0, dt.depth[pix] + dl_img);
    const double mu = (to_virtual_depth(d, cam.intrinsics, cfg.virtual_unit) - bins.lo) /
                          bins.width() - 0.5;
    for (std::size_t b = 0; b < bins.count; ++b) {
      const double z = (static_cast<double>(b) - mu) / cfg.depth_bin_sigma;
      pred[b * plane + pix] = std::exp(-0.5 * z * z);
    }
  }
  return pred;
}

Tensor one_hot_depth(const DepthTargets& dt, const CameraModel& cam,
                     const VirtualDepthBins& bins, const RunConfig& cfg) {
  const std::size_t h = dt.depth.dim(0), w = dt.depth.dim(1), plane = h * w;
  Tensor target({bins.count, h, w});
  for (std::size_t pix = 0; pix < plane; ++pix) {
    if (dt.mask[pix] != 0.0) {
      const double dv = to_virtual_depth(dt.depth[pix], cam.intrinsics, cfg.virtual_unit);
      target[bins.index(dv) * plane + pix] = 1.0;
    }
  }
  return target;
}

Intrinsics reference_intrinsics() { return make_rig(RigPreset::nuscenes).front().intrinsics; }

}  // namespace

LossReport source_losses(const SceneAnnotation& scene, const RunConfig& cfg,
                         SceneArtifacts* artifacts) {
  if (scene.rig.empty()) {
    throw ValidationError("source_losses: scene has no cameras");
  }
  const IFVolume vol = build_volume(scene.boxes, cfg);
  const VirtualDepthBins bins = VirtualDepthBins::make(
      reference_intrinsics(), cfg.render.near, cfg.render.far, cfg.depth_bins, cfg.virtual_unit);
  const int ncls = cfg.scene.num_classes;
  const int w = cfg.render.width, h = cfg.render.height;

  LossReport parts;
  std::vector<Tensor> rendered, targets, pseudo, depth;
  for (std::size_t i = 0; i < scene.rig.size(); ++i) {
    const CameraModel& cam = scene.rig[i];
    check_render_grid(cam, cfg);

    Rng pert_rng = camera_stream(scene, kPerturbStream, i);
    const CameraModel moved = perturb_pose(cam, cfg.perturbation, pert_rng);
    const RenderedHeads heads = render_heads(vol, moved, cfg);
    const TargetMaps tm = build_targets(scene, moved, ncls, cfg.stride, w, h);
    parts.render += focal_loss(heads.heatmaps, tm.heatmaps).value +
                    l1_masked(heads.attributes, tm.attributes, tm.attr_mask).value;

    const DepthTargets dt = build_depth_targets(scene, cam, cfg.stride, w, h, DepthMode::box_center);
    const Tensor d_pre = simulated_depth_prediction(dt, cam, bins, cfg, 0.0);
    parts.pg += bce_depth(d_pre, one_hot_depth(dt, cam, bins, cfg), dt.mask).value;

    Rng pseudo_rng = camera_stream(scene, kPseudoStream, i);
    const Tensor p2d =
        synthesize_pseudo_2d(scene, cam, cfg.pseudo, pseudo_rng, ncls, cfg.stride, w, h);
    const TargetMaps gt = build_targets(scene, cam, ncls, cfg.stride, w, h);
    parts.ps += focal_loss(p2d, gt.heatmaps).value;

    if (artifacts) {
      rendered.push_back(heads.heatmaps);
      targets.push_back(tm.heatmaps);
      pseudo.push_back(p2d);
      depth.push_back(dt.depth);
    }
  }
  const auto n = static_cast<double>(scene.rig.size());
  parts.render /= n;
  parts.pg /= n;
  parts.ps /= n;
  if (artifacts) {
    *artifacts = {stack(rendered), stack(targets), stack(pseudo), stack(depth), vol, {}};
  }
  return total_loss(parts, LossWeights::source());
}

double scene_consistency(const SceneAnnotation& scene, const std::vector<Box3D>& bev_boxes,
                         const RunConfig& cfg, const PseudoNoise& noise) {
  const IFVolume vol = build_volume(bev_boxes, cfg);
  double sum = 0.0;
  for (std::size_t i = 0; i < scene.rig.size(); ++i) {
    check_render_grid(scene.rig[i], cfg);
    Rng rng = camera_stream(scene, kPseudoStream, i);
    const Tensor p2d = synthesize_pseudo_2d(scene, scene.rig[i], noise, rng,
                                            cfg.scene.num_classes, cfg.stride,
                                            cfg.render.width, cfg.render.height);
    sum += consistency_loss(render_heads(vol, scene.rig[i], cfg).heatmaps, p2d, cfg.tau).value;
  }
  return scene.rig.empty() ? 0.0 : sum / static_cast<double>(scene.rig.size());
}

LossReport target_losses(const SceneAnnotation& scene, const RunConfig& cfg,
                         SceneArtifacts* artifacts) {
  if (scene.rig.empty()) {
    throw ValidationError("target_losses: scene has no cameras");
  }
  const std::vector<Box3D> biased = inject_bias(scene.boxes, cfg.bias, scene.rig);
  const IFVolume vol = build_volume(biased, cfg);
  const int ncls = cfg.scene.num_classes;
  const int w = cfg.render.width, h = cfg.render.height;

  LossReport parts;
  std::vector<Tensor> rendered, targets, pseudo, depth;
  for (std::size_t i = 0; i < scene.rig.size(); ++i) {
    const CameraModel& cam = scene.rig[i];
    check_render_grid(cam, cfg);
    Rng rng = camera_stream(scene, kPseudoStream, i);
    const Tensor p2d = synthesize_pseudo_2d(scene, cam, cfg.pseudo, rng, ncls, cfg.stride, w, h);
    const RenderedHeads heads = render_heads(vol, cam, cfg);
    parts.con += consistency_loss(heads.heatmaps, p2d, cfg.tau).value;
    if (artifacts) {
      rendered.push_back(heads.heatmaps);
      targets.push_back(sharpen_pseudo(p2d, cfg.tau));
      pseudo.push_back(p2d);
      depth.push_back(
          build_depth_targets(scene, cam, cfg.stride, w, h, DepthMode::box_center).depth);
    }
  }
  parts.con /= static_cast<double>(scene.rig.size());
  if (artifacts) {
    *artifacts = {stack(rendered), stack(targets), stack(pseudo), stack(depth), vol, {}};
  }
  return total_loss(parts, LossWeights::target());
}

Json build_manifest(const fs::path& dir, const Json& extra) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().filename() != "manifest.json") {
      files.push_back(fs::relative(entry.path(), dir));
    }
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.generic_string() < b.generic_string(); });
  Json artifacts = Json::array();
  for (const auto& rel : files) {
    artifacts.push_back({{"path", rel.generic_string()},
                         {"bytes", fs::file_size(dir / rel)},
                         {"sha256", sha256_file(dir / rel)}});
  }
  Json m = extra;
  m["format_version"] = kFormatVersion;
  m["artifacts"] = artifacts;
  return m;
}

RunReport run_pipeline(const RunConfig& cfg) {
  cfg.validate();
  const fs::path& out = cfg.out_dir;
  fs::create_directories(out);
  write_json(out / "config.json", config_to_json(cfg));

  const std::vector<std::string> map_axes{"camera", "class", "h", "w"};
  LossReport sum;
  std::vector<EvalFrame> frames;
  for (int s = 0; s < cfg.scenes; ++s) {
    const SceneAnnotation scene = simulate_scene(cfg, cfg.domain, s);
    SceneArtifacts art;
    const LossReport lr = cfg.domain == Domain::source ? source_losses(scene, cfg, &art)
                                                       : target_losses(scene, cfg, &art);
    sum.det += lr.det;
    sum.render += lr.render;
    sum.pg += lr.pg;
    sum.ps += lr.ps;
    sum.con += lr.con;

    // Detector output: the biased detector in the target domain, unbiased in
    // the source domain, with deterministic confidence scores.
    const std::vector<Box3D> reported = cfg.domain == Domain::target
                                            ? inject_bias(scene.boxes, cfg.bias, scene.rig)
                                            : scene.boxes;
    Rng score_rng = Rng::stream(scene.seed, kScoreStream);
    std::vector<Detection> dets;
    for (const Box3D& b : reported) {
      dets.push_back({b, 0.5 + 0.5 * score_rng.uniform()});
    }
    frames.push_back({dets, scene.boxes});

    char name[32];
    std::snprintf(name, sizeof name, "scene_%03d", s);
    const fs::path dir = out / name;
    fs::create_directories(dir);
    write_json(dir / "scene.json", scene_to_json(scene));
    write_json(dir / "detections.json", detections_to_json(dets));
    write_tensor(dir / "ifv.json", art.volume.values,
                 {{"axes", {"channel", "z", "x", "y"}}, {"grid", grid_to_json(cfg.grid)}});
    write_tensor(dir / "rendered_heatmaps.json", art.rendered, {{"axes", map_axes}});
    write_tensor(dir / "target_heatmaps.json", art.targets,
                 {{"axes", map_axes},
                  {"kind", cfg.domain == Domain::source ? "h_gt" : "sharpened_pseudo"}});
    write_tensor(dir / "pseudo_2d.json", art.pseudo_2d, {{"axes", map_axes}});
    write_tensor(dir / "depth_targets.json", art.depth,
                 {{"axes", {"camera", "h", "w"}}, {"mode", "box_center"}, {"invalid", 0.0}});
    emit_heatmap_image(art.rendered.slice(0).slice(0), dir / "rendered_cam0.pgm");
    emit_heatmap_image(art.targets.slice(0).slice(0), dir / "target_cam0.pgm");
  }
  const double n = static_cast<double>(cfg.scenes);
  sum.det /= n;
  sum.render /= n;
  sum.pg /= n;
  sum.ps /= n;
  sum.con /= n;

  RunReport report;
  report.losses = total_loss(sum, weights_for(cfg.domain));
  report.metrics = evaluate(frames, cfg.eval_class, cfg.thresholds);
  write_json(out / "losses.json", loss_report_to_json(report.losses));
  write_json(out / "metrics.json", metrics_to_json(report.metrics));

  const Json extra = {{"tool", "bevdebias"},
                      {"command", "run"},
                      {"rng", std::string(Rng::kAlgorithm)},
                      {"seed", cfg.seed},
                      {"domain", domain_name(cfg.domain)},
                      {"config", config_to_json(cfg)},
                      {"losses", loss_report_to_json(report.losses)},
                      {"metrics", metrics_to_json(report.metrics)}};
  report.manifest = build_manifest(out, extra);
  report.manifest_path = out / "manifest.json";
  write_json(report.manifest_path, report.manifest);
  return report;
}

}  // namespace bevdebias
