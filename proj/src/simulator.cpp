#include "bevdebias/simulator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "bevdebias/error.hpp"
#include "bevdebias/targets.hpp"

namespace bevdebias {

RigPreset parse_preset(std::string_view name) {
  if (name == "nuscenes") return RigPreset::nuscenes;
  if (name == "deepaccident") return RigPreset::deepaccident;
  if (name == "lyft") return RigPreset::lyft;
  if (name == "custom") return RigPreset::custom;
  throw ValidationError("unknown rig preset '" + std::string(name) + "'");
}

std::string_view preset_name(RigPreset p) {
  switch (p) {
    case RigPreset::nuscenes: return "nuscenes";
    case RigPreset::deepaccident: return "deepaccident";
    case RigPreset::lyft: return "lyft";
    case RigPreset::custom: return "custom";
  }
  return "custom";
}

std::vector<CameraModel> make_rig(RigPreset preset) {
  static constexpr std::array<const char*, 6> kNames = {
      "CAM_FRONT", "CAM_FRONT_LEFT", "CAM_BACK_LEFT", "CAM_BACK", "CAM_BACK_RIGHT",
      "CAM_FRONT_RIGHT"};
  // Native focal lengths per camera and the native image width they refer to.
  std::array<std::pair<double, double>, 6> native{};
  switch (preset) {
    case RigPreset::nuscenes:
      native.fill({1260.0, 1600.0});
      break;
    case RigPreset::deepaccident:
      native.fill({560.0, 1600.0});
      native[0] = {1142.0, 1600.0};
      break;
    case RigPreset::lyft:
      native.fill({1109.0, 1224.0});
      native[5] = {878.0, 1600.0};
      break;
    case RigPreset::custom:
      throw ValidationError("preset 'custom' needs an explicit rig file");
  }
  std::vector<CameraModel> rig;
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    const double yaw = static_cast<double>(i) * std::numbers::pi / 3.0;
    const double f = native[i].first * kInputWidth / native[i].second;
    CameraModel cam;
    cam.name = kNames[i];
    cam.intrinsics = {f, f, kInputWidth / 2.0, kInputHeight / 2.0, kInputWidth, kInputHeight};
    const Vec3 pos{kRigRadius * std::cos(yaw), kRigRadius * std::sin(yaw), kRigHeight};
    cam.extrinsics = yaw_only_extrinsics(yaw, pos);
    rig.push_back(cam);
  }
  return rig;
}

void SceneSpec::validate(const GridSpec& grid) const {
  if (min_boxes < 0 || max_boxes < min_boxes) {
    throw ValidationError("scene spec: need 0 <= min_boxes <= max_boxes");
  }
  const bool sizes_ok = length_lo > 0.0 && length_hi >= length_lo && width_lo > 0.0 &&
                        width_hi >= width_lo && height_lo > 0.0 && height_hi >= height_lo;
  if (!sizes_ok) {
    throw ValidationError("scene spec: size ranges must be positive and ordered");
  }
  if (!(x_max > x_min) || !(y_max > y_min)) {
    throw ValidationError("scene spec: empty placement region");
  }
  if (x_min < grid.x_min || x_max > grid.x_max || y_min < grid.y_min || y_max > grid.y_max) {
    throw ValidationError("scene spec: placement region exceeds the BEV range");
  }
  if (min_range < 0.0 || min_separation < 0.0 || num_classes < 1) {
    throw ValidationError("scene spec: negative distance or no classes");
  }
}

SceneAnnotation generate_scene(const SceneSpec& spec, const std::vector<CameraModel>& rig) {
  SceneAnnotation scene;
  scene.rig = rig;
  scene.seed = spec.seed;
  Rng rng = Rng::stream(spec.seed, 0);
  const auto span = static_cast<std::uint64_t>(spec.max_boxes - spec.min_boxes + 1);
  const int n = spec.min_boxes + static_cast<int>(rng.below(span));
  for (int i = 0; i < n; ++i) {
    Box3D box;
    box.size = {rng.uniform(spec.length_lo, spec.length_hi),
                rng.uniform(spec.width_lo, spec.width_hi),
                rng.uniform(spec.height_lo, spec.height_hi)};
    box.yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
    box.class_id = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.num_classes)));
    bool placed = false;
    for (int attempt = 0; attempt < kMaxRejections && !placed; ++attempt) {
      const double x = rng.uniform(spec.x_min, spec.x_max);
      const double y = rng.uniform(spec.y_min, spec.y_max);
      if (std::hypot(x, y) < spec.min_range) {
        continue;
      }
      const bool clear = std::all_of(scene.boxes.begin(), scene.boxes.end(), [&](const Box3D& o) {
        return std::hypot(o.center.x - x, o.center.y - y) >= spec.min_separation;
      });
      if (clear) {
        box.center = {x, y, box.size.z() / 2.0};
        placed = true;
      }
    }
    if (!placed) {
      throw OvercrowdedSpec("generate_scene: could not place box " + std::to_string(i) +
                            " after " + std::to_string(kMaxRejections) + " attempts");
    }
    scene.boxes.push_back(box);
  }
  return scene;
}

namespace {

double logit(double p) {
  p = std::clamp(p, 1e-12, 1.0 - 1e-12);
  return std::clamp(std::log(p / (1.0 - p)), -kHeightLogit, kHeightLogit);
}

}  // namespace

std::pair<BEVGrid, HeightLogits> synthesize_bev(const std::vector<Box3D>& boxes,
                                                const BevSynthConfig& cfg) {
  const GridSpec& g = cfg.grid;
  g.validate();
  if (cfg.num_classes < 1 || !(cfg.blob_sigma > 0.0)) {
    throw ValidationError("synthesize_bev: need at least one class and a positive blob sigma");
  }
  const std::size_t nx = g.nx(), ny = g.ny(), nz = g.nz;
  const auto ncls = static_cast<std::size_t>(cfg.num_classes);
  const std::size_t channels = ncls + (cfg.attributes ? 3 : 0);
  BEVGrid bev{Tensor({channels, nx, ny}), g};
  HeightLogits hl{Tensor({nz, nx, ny}, -kHeightLogit), g};
  // Strongest occupancy seen so far at each cell; the owning box also sets
  // the height profile and attributes there.
  Tensor best({nx, ny});

  for (const Box3D& box : boxes) {
    box.validate();
    if (box.class_id >= cfg.num_classes) {
      throw ValidationError("synthesize_bev: class id out of range");
    }
    const double c = std::cos(box.yaw), s = std::sin(box.yaw);
    const double half_l = box.size.x() / 2.0, half_w = box.size.y() / 2.0;
    const double sig_l = box.size.x() * cfg.blob_sigma, sig_w = box.size.y() * cfg.blob_sigma;
    const double sig_z = box.size.z() * cfg.blob_sigma;
    const double reach = cfg.encoding == BevEncoding::center
                             ? 4.0 * std::max(sig_l, sig_w)
                             : std::hypot(half_l, half_w);
    const auto lo = [&](double v, double mn) {
      return static_cast<long>(std::floor((v - mn) / g.cell_size));
    };
    const long x0 = std::max(0L, lo(box.center.x - reach, g.x_min));
    const long x1 = std::min(static_cast<long>(nx) - 1, lo(box.center.x + reach, g.x_min));
    const long y0 = std::max(0L, lo(box.center.y - reach, g.y_min));
    const long y1 = std::min(static_cast<long>(ny) - 1, lo(box.center.y + reach, g.y_min));
    for (long ix = x0; ix <= x1; ++ix) {
      for (long iy = y0; iy <= y1; ++iy) {
        const double px = g.x_min + (static_cast<double>(ix) + 0.5) * g.cell_size;
        const double py = g.y_min + (static_cast<double>(iy) + 0.5) * g.cell_size;
        const double dx = px - box.center.x, dy = py - box.center.y;
        const double along = c * dx + s * dy;
        const double across = -s * dx + c * dy;
        double occ = 0.0;
        if (cfg.encoding == BevEncoding::footprint) {
          occ = (std::abs(along) <= half_l && std::abs(across) <= half_w) ? 1.0 : 0.0;
        } else if (std::abs(along) <= 4.0 * sig_l && std::abs(across) <= 4.0 * sig_w) {
          occ = std::exp(-0.5 * (along * along / (sig_l * sig_l) +
                                 across * across / (sig_w * sig_w)));
        }
        const auto x = static_cast<std::size_t>(ix), y = static_cast<std::size_t>(iy);
        if (occ <= 0.0 || occ <= best(x, y)) {
          continue;
        }
        best(x, y) = occ;
        for (std::size_t k = 0; k < ncls; ++k) {
          bev.features(k, x, y) = 0.0;
        }
        bev.features(static_cast<std::size_t>(box.class_id), x, y) = occ;
        if (cfg.attributes) {
          for (std::size_t a = 0; a < 3; ++a) {
            bev.features(ncls + a, x, y) = box.size[static_cast<Eigen::Index>(a)] * occ;
          }
        }
        const double z_lo = box.center.z - box.size.z() / 2.0;
        const double z_hi = box.center.z + box.size.z() / 2.0;
        for (std::size_t iz = 0; iz < nz; ++iz) {
          const double c_lo = g.z_min + static_cast<double>(iz) * g.z_cell();
          const double c_hi = c_lo + g.z_cell();
          double value = -kHeightLogit;
          if (cfg.encoding == BevEncoding::footprint) {
            value = (c_hi > z_lo && c_lo < z_hi) ? kHeightLogit : -kHeightLogit;
          } else {
            const double dz = (c_lo + c_hi) / 2.0 - box.center.z;
            value = logit(std::exp(-0.5 * dz * dz / (sig_z * sig_z)));
          }
          hl.logits(iz, x, y) = value;
        }
      }
    }
  }
  return {std::move(bev), std::move(hl)};
}

void PseudoNoise::validate() const {
  const auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!(score_sigma >= 0.0) || !prob(fn_rate) || !prob(fp_rate)) {
    throw ValidationError("pseudo noise: sigma >= 0 and rates in [0, 1] required");
  }
}

Tensor synthesize_pseudo_2d(const SceneAnnotation& scene, const CameraModel& cam,
                            const PseudoNoise& noise, Rng& rng, int num_classes, double stride,
                            int width, int height) {
  noise.validate();
  if (num_classes < 1 || width < 1 || height < 1) {
    throw ValidationError("synthesize_pseudo_2d: need classes and a non-empty grid");
  }
  const std::size_t plane = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  Tensor out({static_cast<std::size_t>(num_classes), static_cast<std::size_t>(height),
              static_cast<std::size_t>(width)});
  for (const Box3D& box : scene.boxes) {
    if (box.class_id >= num_classes) {
      throw ValidationError("synthesize_pseudo_2d: class id out of range");
    }
    const auto pb = project_box(box, cam, stride);
    if (!pb) {
      continue;
    }
    // Fixed draw count per visible box keeps streams aligned across settings.
    const double drop = rng.uniform();
    const double jitter = rng.normal();
    const double spawn = rng.uniform();
    const double fu = rng.uniform(), fv = rng.uniform(), fs = rng.uniform();
    if (drop < noise.fn_rate) {
      continue;
    }
    auto heat = out.data().subspan(static_cast<std::size_t>(box.class_id) * plane, plane);
    const double score = std::clamp(1.0 + noise.score_sigma * jitter, 0.0, 1.0);
    draw_gaussian(heat, width, height, static_cast<int>(std::floor(pb->center.u)),
                  static_cast<int>(std::floor(pb->center.v)), pb->radius, score);
    if (spawn < noise.fp_rate) {
      draw_gaussian(heat, width, height, static_cast<int>(fu * width),
                    static_cast<int>(fv * height), kMinRadius, 0.3 + 0.7 * fs);
    }
  }
  return out;
}

std::size_t nearest_camera(const EgoPoint& p, const std::vector<CameraModel>& rig) {
  if (rig.empty()) {
    throw ValidationError("nearest_camera: empty rig");
  }
  std::size_t best = 0;
  double best_cos = -2.0;
  for (std::size_t i = 0; i < rig.size(); ++i) {
    const Vec3 axis = rig[i].extrinsics.rotation.row(2).transpose();
    const Vec3 to_p = p.vec() - rig[i].extrinsics.camera_center();
    const double n = to_p.norm();
    const double c = n > 0.0 ? axis.dot(to_p) / n : -1.0;
    if (c > best_cos) {
      best_cos = c;
      best = i;
    }
  }
  return best;
}

std::vector<Box3D> inject_bias(const std::vector<Box3D>& boxes, const BiasDecomposition& bias,
                               const std::vector<CameraModel>& rig) {
  std::vector<Box3D> out;
  out.reserve(boxes.size());
  for (const Box3D& b : boxes) {
    Box3D moved = b;
    moved.center = biased_location(b.center, bias, rig[nearest_camera(b.center, rig)]);
    out.push_back(moved);
  }
  return out;
}

std::vector<Detection> as_detections(const std::vector<Box3D>& boxes, double score) {
  std::vector<Detection> out;
  out.reserve(boxes.size());
  for (const Box3D& b : boxes) {
    out.push_back({b, score});
  }
  return out;
}

}  // namespace bevdebias
