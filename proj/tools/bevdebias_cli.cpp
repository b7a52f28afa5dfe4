// bevdebias: command-line front end.
//
// Exit codes: 0 success, 2 validation error (bad input or configuration),
// 1 anything else. Failures print a JSON error document to stderr and, when
// --out is set, also write it to <out>/error.json.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <typeinfo>
#include <vector>

#include <CLI11.hpp>

#include "bevdebias/bias_model.hpp"
#include "bevdebias/error.hpp"
#include "bevdebias/image.hpp"
#include "bevdebias/io.hpp"
#include "bevdebias/pipeline.hpp"
#include "bevdebias/render.hpp"
#include "bevdebias/targets.hpp"

namespace fs = std::filesystem;
using namespace bevdebias;

namespace {

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out = "out";
  std::string domain;
  std::string preset;
};

RunConfig load_config(const GlobalOptions& g) {
  RunConfig cfg;
  if (!g.config.empty()) {
    cfg = config_from_json(read_json(g.config));
  }
  if (g.seed) cfg.seed = *g.seed;
  if (!g.domain.empty()) cfg.domain = parse_domain(g.domain);
  if (!g.preset.empty()) {
    (cfg.domain == Domain::source ? cfg.source_preset : cfg.target_preset) = g.preset;
  }
  cfg.out_dir = g.out;
  return cfg;
}

std::string scene_dir_name(int i) {
  char name[32];
  std::snprintf(name, sizeof name, "scene_%03d", i);
  return name;
}

int cmd_simulate(const GlobalOptions& g, int n) {
  RunConfig cfg = load_config(g);
  if (n >= 0) cfg.scenes = n;
  if (cfg.scenes < 0) throw ValidationError("--n must be >= 0");
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  write_json(cfg.out_dir / "config.json", config_to_json(cfg));
  const int ncls = cfg.scene.num_classes;
  for (int s = 0; s < cfg.scenes; ++s) {
    const SceneAnnotation scene = simulate_scene(cfg, cfg.domain, s);
    const fs::path dir = cfg.out_dir / scene_dir_name(s);
    fs::create_directories(dir);
    write_json(dir / "scene.json", scene_to_json(scene));
    const auto [bev, logits] =
        synthesize_bev(scene.boxes, {cfg.grid, cfg.encoding, ncls, true, cfg.blob_sigma});
    write_tensor(dir / "bev_features.json", bev.features, {{"axes", {"channel", "x", "y"}}});
    write_tensor(dir / "height_logits.json", logits.logits, {{"axes", {"z", "x", "y"}}});
    write_tensor(dir / "ifv.json", lift_to_ifv(bev, logits).values,
                 {{"axes", {"channel", "z", "x", "y"}}, {"grid", grid_to_json(cfg.grid)}});
    std::vector<Tensor> heat, pseudo;
    for (std::size_t i = 0; i < scene.rig.size(); ++i) {
      heat.push_back(build_targets(scene, scene.rig[i], ncls, cfg.stride, cfg.render.width,
                                   cfg.render.height)
                         .heatmaps);
      Rng rng = Rng::stream(scene.seed, 200 + i);
      pseudo.push_back(synthesize_pseudo_2d(scene, scene.rig[i], cfg.pseudo, rng, ncls,
                                            cfg.stride, cfg.render.width, cfg.render.height));
    }
    for (std::size_t i = 0; i < scene.rig.size(); ++i) {
      emit_heatmap_image(heat[i].slice(0), dir / ("target_" + scene.rig[i].name + ".pgm"));
    }
    const auto stacked = [](const std::vector<Tensor>& parts) {
      std::vector<std::size_t> shape{parts.size()};
      if (!parts.empty()) shape.insert(shape.end(), parts[0].shape().begin(), parts[0].shape().end());
      Tensor t(shape);
      std::size_t k = 0;
      for (const auto& p : parts) for (double v : p.data()) t[k++] = v;
      return t;
    };
    const Json axes = {{"axes", {"camera", "class", "h", "w"}}};
    write_tensor(dir / "target_heatmaps.json", stacked(heat), axes);
    write_tensor(dir / "pseudo_2d.json", stacked(pseudo), axes);
  }
  const Json m = build_manifest(cfg.out_dir, {{"tool", "bevdebias"},
                                              {"command", "simulate"},
                                              {"rng", std::string(Rng::kAlgorithm)},
                                              {"seed", cfg.seed}});
  write_json(cfg.out_dir / "manifest.json", m);
  std::cout << "wrote " << cfg.scenes << " scene(s) to " << cfg.out_dir.string() << "\n";
  return 0;
}

std::vector<CameraModel> load_rig(const std::string& path) {
  const Json doc = read_json(path);
  // A scene file carries its rig under "rig".
  return rig_from_json(doc.contains("rig") ? doc.at("rig") : doc);
}

int cmd_render(const GlobalOptions& g, const std::string& volume_path,
               const std::string& rig_path, int camera, bool perturb) {
  RunConfig cfg = load_config(g);
  const TensorFile tf = read_tensor(volume_path);
  if (tf.tensor.rank() != 4) {
    throw DimensionError("render: volume tensor must be (C, Z, X, Y)");
  }
  const GridSpec grid = tf.meta.contains("grid") ? grid_from_json(tf.meta.at("grid")) : cfg.grid;
  const IFVolume vol{tf.tensor, grid};
  if (vol.values.dim(1) != grid.nz || vol.values.dim(2) != grid.nx() ||
      vol.values.dim(3) != grid.ny()) {
    throw DimensionError("render: volume shape disagrees with its grid");
  }
  cfg.render.validate();
  const std::vector<CameraModel> rig = load_rig(rig_path);
  if (rig.empty()) throw ValidationError("render: rig has no cameras");
  if (camera >= static_cast<int>(rig.size())) throw ValidationError("--camera out of range");
  fs::create_directories(cfg.out_dir);
  Json views = Json::array();
  for (std::size_t i = 0; i < rig.size(); ++i) {
    if (camera >= 0 && static_cast<std::size_t>(camera) != i) continue;
    CameraModel cam = rig[i];
    if (perturb) {
      Rng rng = Rng::stream(cfg.seed, 100 + i);
      cam = perturb_pose(cam, cfg.perturbation, rng);
    }
    const RenderedFeatureMap map = render_view(vol, make_rays(cam, cfg.render));
    const std::string stem = "render_" + cam.name;
    write_tensor(cfg.out_dir / (stem + ".json"), map.features,
                 {{"axes", {"channel", "h", "w"}},
                  {"camera", camera_to_json(cam)},
                  {"perturbed", perturb}});
    Json previews = Json::array();
    for (std::size_t c = 0; c < map.features.dim(0); ++c) {
      const std::string png = stem + "_c" + std::to_string(c) + ".pgm";
      emit_heatmap_image(map.features.slice(c), cfg.out_dir / png);
      previews.push_back(png);
    }
    views.push_back({{"camera", cam.name}, {"tensor", stem + ".json"}, {"previews", previews}});
  }
  write_json(cfg.out_dir / "render.json", {{"format_version", kFormatVersion},
                                            {"volume", volume_path},
                                            {"rig", rig_path},
                                            {"views", views}});
  std::cout << "rendered " << views.size() << " view(s) to " << cfg.out_dir.string() << "\n";
  return 0;
}

int cmd_bias_analyze(const GlobalOptions& g, double dl_img, const std::vector<double>& dl_bev,
                     int samples, double depth, int stride) {
  RunConfig cfg = load_config(g);
  if (dl_bev.size() != 3) throw ValidationError("--dl-bev needs three values");
  if (samples < 1) throw ValidationError("--samples must be >= 1");
  if (stride < 1) throw ValidationError("--stride must be >= 1");
  if (!(depth > 0.0)) throw ValidationError("--depth must be positive");
  const BiasDecomposition bias{dl_img, Vec3{dl_bev[0], dl_bev[1], dl_bev[2]}};
  const std::vector<CameraModel> rig = domain_rig(cfg, cfg.domain);
  fs::create_directories(cfg.out_dir);
  Rng rng = Rng::stream(cfg.seed, 0);
  Json cams = Json::array();
  double worst = 0.0;
  for (const CameraModel& cam : rig) {
    const auto& k_in = cam.intrinsics;
    const BiasCoefficients k = bias_coefficients(bias, cam, depth);
    double cam_worst = 0.0;
    for (int s = 0; s < samples; ++s) {
      const double u = rng.uniform(0.0, k_in.width);
      const double v = rng.uniform(0.0, k_in.height);
      const double d = rng.uniform(2.0, 60.0);
      const EgoPoint p = unproject({u, v, d}, cam);
      const PixelShift a = analytic_bias(bias_coefficients(bias, cam, d), u, v, k_in.cu, k_in.cv);
      const PixelShift o = oracle_bias(p, bias, cam);
      cam_worst = std::max({cam_worst, std::abs(a.du - o.du) / std::max(std::abs(o.du), 1.0),
                            std::abs(a.dv - o.dv) / std::max(std::abs(o.dv), 1.0)});
    }
    worst = std::max(worst, cam_worst);

    // Field over the image plane at the reference depth, one sample per
    // stride x stride block at its center.
    const std::size_t fw = static_cast<std::size_t>(k_in.width / stride);
    const std::size_t fh = static_cast<std::size_t>(k_in.height / stride);
    Tensor field({2, fh, fw}), mag({fh, fw});
    double max_du = 0.0, max_dv = 0.0;
    for (std::size_t h = 0; h < fh; ++h) {
      for (std::size_t w = 0; w < fw; ++w) {
        const double u = (static_cast<double>(w) + 0.5) * stride;
        const double v = (static_cast<double>(h) + 0.5) * stride;
        const PixelShift s = analytic_bias(k, u, v, k_in.cu, k_in.cv);
        field(0, h, w) = s.du;
        field(1, h, w) = s.dv;
        mag(h, w) = std::abs(s.du) + std::abs(s.dv);
        max_du = std::max(max_du, std::abs(s.du));
        max_dv = std::max(max_dv, std::abs(s.dv));
      }
    }
    const std::string stem = "bias_field_" + cam.name;
    write_tensor(cfg.out_dir / (stem + ".json"), field,
                 {{"axes", {"du_dv", "h", "w"}},
                  {"stride", stride},
                  {"reference_depth", depth},
                  {"camera", cam.name}});
    emit_heatmap_image(mag, cfg.out_dir / (stem + ".pgm"));
    cams.push_back({{"name", cam.name},
                    {"theta", level_camera_yaw(cam.extrinsics)},
                    {"coefficients",
                     {{"k_u", k.k_u}, {"b_u", k.b_u}, {"k_v", k.k_v}, {"b_v", k.b_v},
                      {"denom_depth", k.denom_depth}}},
                    {"max_abs_delta_uv", {max_du, max_dv}},
                    {"field", stem + ".json"},
                    {"heatmap", stem + ".pgm"},
                    {"max_rel_error_vs_oracle", cam_worst}});
  }
  const Json report = {{"format_version", kFormatVersion},
                       {"preset", cfg.domain == Domain::source ? cfg.source_preset
                                                               : cfg.target_preset},
                       {"reference_depth", depth},
                       {"bias", {{"dl_img", dl_img}, {"dl_bev", dl_bev}}},
                       {"samples_per_camera", samples},
                       {"max_rel_error_vs_oracle", worst},
                       {"cameras", cams}};
  write_json(cfg.out_dir / "bias_analysis.json", report);
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_eval(const GlobalOptions& g, const std::vector<std::string>& det_paths,
             const std::vector<std::string>& scene_paths, int class_id,
             std::vector<double> thresholds) {
  if (det_paths.size() != scene_paths.size() || det_paths.empty()) {
    throw ValidationError("eval: give one --detections file per --scene file");
  }
  if (thresholds.empty()) thresholds = default_thresholds();
  std::vector<EvalFrame> frames;
  for (std::size_t i = 0; i < det_paths.size(); ++i) {
    frames.push_back({detections_from_json(read_json(det_paths[i])),
                      scene_from_json(read_json(scene_paths[i])).boxes});
  }
  const MetricsReport r = evaluate(frames, class_id, thresholds);
  fs::create_directories(g.out);
  write_json(fs::path(g.out) / "metrics.json", metrics_to_json(r));
  std::cout << metrics_to_json(r).dump(2) << "\n";
  return 0;
}

int cmd_debias_demo(const GlobalOptions& g) {
  RunConfig cfg = load_config(g);
  cfg.validate();
  const SceneAnnotation src = simulate_scene(cfg, Domain::source, 0);
  const SceneAnnotation tgt = simulate_scene(cfg, Domain::target, 0);
  const LossReport ls = source_losses(src, cfg);
  const LossReport lt = target_losses(tgt, cfg);
  const PseudoNoise clean{};
  const double con_biased =
      scene_consistency(tgt, inject_bias(tgt.boxes, cfg.bias, tgt.rig), cfg, clean);
  const double con_unbiased = scene_consistency(tgt, tgt.boxes, cfg, clean);
  const Json report = {{"format_version", kFormatVersion},
                       {"seed", cfg.seed},
                       {"source", loss_report_to_json(ls)},
                       {"target", loss_report_to_json(lt)},
                       {"consistency_clean_labels",
                        {{"biased", con_biased}, {"unbiased", con_unbiased}}}};
  fs::create_directories(cfg.out_dir);
  write_json(cfg.out_dir / "debias_demo.json", report);
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_run(const GlobalOptions& g, int scenes) {
  RunConfig cfg = load_config(g);
  if (scenes > 0) cfg.scenes = scenes;
  const RunReport r = run_pipeline(cfg);
  std::cout << "manifest: " << r.manifest_path.string() << "\n"
            << "losses: " << loss_report_to_json(r.losses).dump() << "\n"
            << "nds_star: " << r.metrics.nds_star << "\n";
  return 0;
}

std::string error_type(const std::exception& e) {
  if (dynamic_cast<const DegenerateProjection*>(&e)) return "DegenerateProjection";
  if (dynamic_cast<const InvalidDepth*>(&e)) return "InvalidDepth";
  if (dynamic_cast<const DimensionError*>(&e)) return "DimensionError";
  if (dynamic_cast<const SingularView*>(&e)) return "SingularView";
  if (dynamic_cast<const DegenerateBias*>(&e)) return "DegenerateBias";
  if (dynamic_cast<const OvercrowdedSpec*>(&e)) return "OvercrowdedSpec";
  if (dynamic_cast<const FormatError*>(&e)) return "FormatError";
  if (dynamic_cast<const ValidationError*>(&e)) return "ValidationError";
  if (dynamic_cast<const IoError*>(&e)) return "IoError";
  return "InternalError";
}

int report_error(const std::exception& e, int code, const std::string& command,
                 const std::string& out) {
  const Json doc = {{"format_version", kFormatVersion},
                    {"error",
                     {{"type", error_type(e)},
                      {"message", e.what()},
                      {"command", command},
                      {"exit_code", code}}}};
  std::cerr << doc.dump(2) << "\n";
  if (!out.empty()) {
    std::error_code ec;
    fs::create_directories(out, ec);
    std::ofstream f(fs::path(out) / "error.json");
    f << doc.dump(2) << "\n";
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perspective-debiasing toolkit for multi-camera BEV detection"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Run seed");
  app.add_option("--config", g.config, "Run configuration JSON");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--domain", g.domain, "source | target");
  app.add_option("--preset", g.preset, "Rig preset: nuscenes | deepaccident | lyft | custom");

  int n = -1;
  auto* simulate = app.add_subcommand("simulate", "Write simulated scenes and their tensors");
  simulate->add_option("--n", n, "Number of scenes");

  std::string volume_path, rig_path;
  int camera = -1;
  bool perturb = false;
  auto* render = app.add_subcommand("render", "Render a volume tensor through a camera rig");
  render->add_option("--volume", volume_path, "Volume tensor header (C, Z, X, Y)")->required();
  render->add_option("--rig", rig_path, "Rig JSON, or a scene JSON carrying one")->required();
  render->add_option("--camera", camera, "Camera index (default: all)");
  render->add_flag("--perturb", perturb, "Perturb each camera pose first");

  double dl_img = 0.5, depth = 20.0;
  std::vector<double> dl_bev{0.5, 0.0, 0.0};
  int samples = 1000, field_stride = 8;
  auto* bias = app.add_subcommand("bias-analyze", "Closed-form bias per camera vs re-projection");
  bias->add_option("--dl-img", dl_img, "Image-encoder depth error (m)");
  bias->add_option("--dl-bev", dl_bev, "BEV-encoder offset x y z (m, ego frame)")->expected(3);
  bias->add_option("--samples", samples, "Random pixels per camera");
  bias->add_option("--depth", depth, "Reference depth for coefficients and field (m)");
  bias->add_option("--stride", field_stride, "Pixel stride of the bias field");

  std::vector<std::string> det_paths, gt_paths;
  int class_id = 0;
  std::vector<double> thresholds;
  auto* eval = app.add_subcommand("eval", "Evaluate detections against scene ground truth");
  eval->add_option("--detections", det_paths, "Detections JSON (repeatable)")->required();
  eval->add_option("--scene", gt_paths, "Scene JSON with ground truth (repeatable)")->required();
  eval->add_option("--class", class_id, "Class id to evaluate");
  eval->add_option("--thresholds", thresholds, "Matching thresholds (m)")->delimiter(',');

  auto* demo = app.add_subcommand("debias-demo", "Source- and target-mode losses on one scene");

  int scenes = 0;
  auto* run = app.add_subcommand("run", "Full pipeline with manifest");
  run->add_option("--scenes", scenes, "Number of scenes (default from config)");

  std::string command;
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);
    }
    app.exit(e);
    return 2;
  }

  try {
    if (*simulate) { command = "simulate"; return cmd_simulate(g, n); }
    if (*render) { command = "render"; return cmd_render(g, volume_path, rig_path, camera, perturb); }
    if (*bias) { command = "bias-analyze"; return cmd_bias_analyze(g, dl_img, dl_bev, samples, depth, field_stride); }
    if (*eval) { command = "eval"; return cmd_eval(g, det_paths, gt_paths, class_id, thresholds); }
    if (*demo) { command = "debias-demo"; return cmd_debias_demo(g); }
    if (*run) { command = "run"; return cmd_run(g, scenes); }
  } catch (const ValidationError& e) {
    return report_error(e, 2, command, g.out);
  } catch (const std::exception& e) {
    return report_error(e, 1, command, g.out);
  }
  return 1;
}
