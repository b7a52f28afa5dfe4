#include "bevdebias/render.hpp"

#include <array>
#include <cmath>

#include "bevdebias/error.hpp"

namespace bevdebias {

void PosePerturbation::validate() const {
  if ((d_pos.array() < 0.0).any() || d_yaw < 0.0 || d_pitch < 0.0 || d_roll < 0.0) {
    throw ValidationError("perturbation: ranges must be non-negative");
  }
}

void RenderConfig::validate() const {
  if (width < 1 || height < 1 || samples < 1) {
    throw ValidationError("render: width, height and samples must be >= 1");
  }
  if (!(near > 0.0) || !(far > near)) {
    throw ValidationError("render: require 0 < near < far");
  }
}

CameraModel perturb_pose(const CameraModel& cam, const PosePerturbation& pert, Rng& rng) {
  pert.validate();
  auto draw = [&rng](double range) { return rng.uniform(-range, range); };
  const Vec3 dp{draw(pert.d_pos.x()), draw(pert.d_pos.y()), draw(pert.d_pos.z())};
  const double yaw = draw(pert.d_yaw);
  const double pitch = draw(pert.d_pitch);
  const double roll = draw(pert.d_roll);

  // Body-frame delta, expressed in the camera's optical axes.
  const Mat3& p = ego_to_level_camera();
  const Mat3 delta = p * body_rotation(yaw, pitch, roll).transpose() * p.transpose();

  CameraModel out = cam;
  const Vec3 center = cam.extrinsics.camera_center() + dp;
  out.extrinsics.rotation = delta * cam.extrinsics.rotation;
  out.extrinsics.translation = -out.extrinsics.rotation * center;
  return out;
}

RayBundle make_rays(const CameraModel& cam, const RenderConfig& cfg) {
  cfg.validate();
  const auto& k = cam.intrinsics;
  const double sx = static_cast<double>(k.width) / cfg.width;
  const double sy = static_cast<double>(k.height) / cfg.height;
  const Mat3 cam_to_ego = cam.extrinsics.rotation.transpose();

  RayBundle rays;
  rays.camera = cam;
  rays.width = cfg.width;
  rays.height = cfg.height;
  rays.samples = cfg.samples;
  rays.near = cfg.near;
  rays.far = cfg.far;
  rays.origin = cam.extrinsics.camera_center();
  rays.directions.reserve(static_cast<std::size_t>(cfg.width) * cfg.height);
  for (int h = 0; h < cfg.height; ++h) {
    for (int w = 0; w < cfg.width; ++w) {
      const double u = (w + 0.5) * sx;
      const double v = (h + 0.5) * sy;
      const Vec3 dc = Vec3{(u - k.cu) / k.fu, (v - k.cv) / k.fv, 1.0}.normalized();
      rays.directions.push_back(cam_to_ego * dc);
    }
  }
  return rays;
}

namespace {

struct AxisTap {
  std::array<std::ptrdiff_t, 2> index;
  std::array<double, 2> weight;
};

inline AxisTap axis_tap(double v, double lo, double cell, std::ptrdiff_t n) {
  const double f = (v - lo) / cell - 0.5;
  const double fl = std::floor(f);
  const double t = f - fl;
  const auto i0 = static_cast<std::ptrdiff_t>(fl);
  AxisTap tap{{i0, i0 + 1}, {1.0 - t, t}};
  for (int k = 0; k < 2; ++k) {
    if (tap.index[k] < 0 || tap.index[k] >= n) {
      tap.weight[k] = 0.0;
      tap.index[k] = 0;
    }
  }
  return tap;
}

}  // namespace

void sample_volume(const IFVolume& vol, const Vec3& p, std::span<double> out) {
  const GridSpec& g = vol.grid;
  std::fill(out.begin(), out.end(), 0.0);
  if (!g.contains(p.x(), p.y(), p.z())) {
    return;
  }
  const auto nz = static_cast<std::ptrdiff_t>(vol.values.dim(1));
  const auto nx = static_cast<std::ptrdiff_t>(vol.values.dim(2));
  const auto ny = static_cast<std::ptrdiff_t>(vol.values.dim(3));
  const AxisTap tz = axis_tap(p.z(), g.z_min, g.z_cell(), nz);
  const AxisTap tx = axis_tap(p.x(), g.x_min, g.cell_size, nx);
  const AxisTap ty = axis_tap(p.y(), g.y_min, g.cell_size, ny);

  const std::size_t channel_stride = static_cast<std::size_t>(nz * nx * ny);
  const auto data = vol.values.data();
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      for (int c = 0; c < 2; ++c) {
        const double w = tz.weight[a] * tx.weight[b] * ty.weight[c];
        if (w == 0.0) {
          continue;
        }
        const std::size_t base =
            static_cast<std::size_t>((tz.index[a] * nx + tx.index[b]) * ny + ty.index[c]);
        for (std::size_t ch = 0; ch < out.size(); ++ch) {
          out[ch] += w * data[ch * channel_stride + base];
        }
      }
    }
  }
}

RenderedFeatureMap render_view(const IFVolume& vol, const RayBundle& rays) {
  if (vol.values.rank() != 4) {
    throw DimensionError("render_view: volume must be (C,Z,X,Y)");
  }
  const std::size_t channels = vol.values.dim(0);
  const auto w_n = static_cast<std::size_t>(rays.width);
  const auto h_n = static_cast<std::size_t>(rays.height);
  RenderedFeatureMap map{Tensor({channels, h_n, w_n}), rays.camera};

  std::vector<double> sample(channels);
  auto out = map.features.data();
  const std::size_t plane = w_n * h_n;
  for (std::size_t pix = 0; pix < plane; ++pix) {
    const Vec3& dir = rays.directions[pix];
    for (int i = 0; i < rays.samples; ++i) {
      const Vec3 p = rays.origin + dir * rays.sample_depth(i);
      sample_volume(vol, p, sample);
      for (std::size_t ch = 0; ch < channels; ++ch) {
        out[ch * plane + pix] += sample[ch];
      }
    }
  }
  return map;
}

Tensor heatmap_readout(const RenderedFeatureMap& map, std::size_t classes) {
  const auto& f = map.features;
  if (classes > f.dim(0)) {
    throw DimensionError("heatmap_readout: more classes than rendered channels");
  }
  Tensor out({classes, f.dim(1), f.dim(2)});
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 1.0 - std::exp(-std::max(0.0, f[i]));
  }
  return out;
}

Tensor attribute_readout(const RenderedFeatureMap& map, std::size_t classes,
                         double min_response) {
  const auto& f = map.features;
  if (f.dim(0) < classes + 3) {
    throw DimensionError("attribute_readout: map has no (l,w,h) attribute channels");
  }
  const std::size_t plane = f.dim(1) * f.dim(2);
  Tensor out({3, f.dim(1), f.dim(2)});
  for (std::size_t pix = 0; pix < plane; ++pix) {
    double occ = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      occ += f[c * plane + pix];
    }
    if (occ < min_response) {
      continue;
    }
    for (std::size_t a = 0; a < 3; ++a) {
      out[a * plane + pix] = f[(classes + a) * plane + pix] / occ;
    }
  }
  return out;
}

}  // namespace bevdebias
