#include "bevdebias/targets.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "bevdebias/error.hpp"

namespace bevdebias {

void Box3D::validate() const {
  if (!(size.array() > 0.0).all()) {
    throw ValidationError("box: size components must be positive");
  }
  if (class_id < 0) {
    throw ValidationError("box: negative class id");
  }
}

Mat3 Box3D::axes() const {
  const double c = std::cos(yaw), s = std::sin(yaw);
  Mat3 a;
  a << c, -s, 0,
       s, c, 0,
       0, 0, 1;
  return a;
}

std::array<Vec3, 8> Box3D::corners() const {
  const Mat3 a = axes();
  const Vec3 half = size * 0.5;
  std::array<Vec3, 8> out;
  int i = 0;
  for (const double sx : {-1.0, 1.0}) {
    for (const double sy : {-1.0, 1.0}) {
      for (const double sz : {-1.0, 1.0}) {
        out[i++] = center.vec() + a * Vec3{sx * half.x(), sy * half.y(), sz * half.z()};
      }
    }
  }
  return out;
}

int gaussian_radius(double width_px, double height_px) {
  const double w = std::max(width_px, 0.0);
  const double h = std::max(height_px, 0.0);
  const double o = kMinOverlap;

  const double b1 = h + w;
  const double c1 = w * h * (1.0 - o) / (1.0 + o);
  const double r1 = (b1 + std::sqrt(b1 * b1 - 4.0 * c1)) / 2.0;

  const double a2 = 4.0;
  const double b2 = 2.0 * (h + w);
  const double c2 = (1.0 - o) * w * h;
  const double r2 = (b2 + std::sqrt(b2 * b2 - 4.0 * a2 * c2)) / 2.0;

  const double a3 = 4.0 * o;
  const double b3 = -2.0 * o * (h + w);
  const double c3 = (o - 1.0) * w * h;
  const double r3 = (b3 + std::sqrt(b3 * b3 - 4.0 * a3 * c3)) / 2.0;

  const double r = std::min({r1, r2, r3});
  return std::max(kMinRadius, static_cast<int>(r));
}

std::optional<ProjectedBox> project_box(const Box3D& box, const CameraModel& cam, double stride) {
  if (!(stride > 0.0)) {
    throw ValidationError("project_box: stride must be positive");
  }
  const Vec3 pc = cam.extrinsics.apply(box.center.vec());
  if (pc.z() <= kMinCenterDepth) {
    return std::nullopt;
  }
  const PixelPoint full = project(box.center, cam);
  ProjectedBox out;
  out.center = {full.u / stride, full.v / stride, full.d};

  const double frame_w = cam.intrinsics.width / stride;
  const double frame_h = cam.intrinsics.height / stride;
  double u_lo = std::numeric_limits<double>::infinity(), u_hi = -u_lo;
  double v_lo = u_lo, v_hi = -u_lo;
  for (const Vec3& corner : box.corners()) {
    if (cam.extrinsics.apply(corner).z() <= kMinCenterDepth) {
      continue;
    }
    const PixelPoint q = project(EgoPoint::from(corner), cam);
    u_lo = std::min(u_lo, q.u / stride);
    u_hi = std::max(u_hi, q.u / stride);
    v_lo = std::min(v_lo, q.v / stride);
    v_hi = std::max(v_hi, q.v / stride);
  }
  if (u_hi >= u_lo) {
    out.width_px = std::clamp(u_hi, 0.0, frame_w) - std::clamp(u_lo, 0.0, frame_w);
    out.height_px = std::clamp(v_hi, 0.0, frame_h) - std::clamp(v_lo, 0.0, frame_h);
  }
  out.radius = gaussian_radius(out.width_px, out.height_px);

  const double pad = out.radius;
  if (out.center.u < -pad || out.center.u >= frame_w + pad || out.center.v < -pad ||
      out.center.v >= frame_h + pad) {
    return std::nullopt;
  }
  return out;
}

std::optional<PixelPoint> project_box_center(const Box3D& box, const CameraModel& cam,
                                             double stride) {
  if (auto pb = project_box(box, cam, stride)) {
    return pb->center;
  }
  return std::nullopt;
}

void draw_gaussian(std::span<double> plane, int width, int height, int cx, int cy, int radius,
                   double amplitude) {
  const double diameter = 2.0 * radius + 1.0;
  const double sigma = diameter / 6.0;
  const double two_sigma2 = 2.0 * sigma * sigma;
  const double eps = std::numeric_limits<double>::epsilon();
  for (int dy = -radius; dy <= radius; ++dy) {
    const int y = cy + dy;
    if (y < 0 || y >= height) {
      continue;
    }
    for (int dx = -radius; dx <= radius; ++dx) {
      const int x = cx + dx;
      if (x < 0 || x >= width) {
        continue;
      }
      double g = std::exp(-(dx * dx + dy * dy) / two_sigma2);
      if (g < eps) {
        g = 0.0;
      }
      double& cell = plane[static_cast<std::size_t>(y) * width + x];
      cell = std::max(cell, amplitude * g);
    }
  }
}

TargetMaps build_targets(const SceneAnnotation& scene, const CameraModel& cam, int num_classes,
                         double stride, int width, int height) {
  if (num_classes < 1 || width < 1 || height < 1) {
    throw ValidationError("build_targets: need at least one class and a non-empty grid");
  }
  const auto w_n = static_cast<std::size_t>(width);
  const auto h_n = static_cast<std::size_t>(height);
  const std::size_t plane = w_n * h_n;
  TargetMaps t{Tensor({static_cast<std::size_t>(num_classes), h_n, w_n}),
               Tensor({3, h_n, w_n}), Tensor({h_n, w_n})};
  // Depth of the box owning each attribute cell; nearer boxes win so the
  // result does not depend on box order.
  std::vector<double> owner_depth(plane, std::numeric_limits<double>::infinity());

  for (const Box3D& box : scene.boxes) {
    if (box.class_id >= num_classes) {
      throw ValidationError("build_targets: class id out of range");
    }
    const auto pb = project_box(box, cam, stride);
    if (!pb) {
      continue;
    }
    const int cx = static_cast<int>(std::floor(pb->center.u));
    const int cy = static_cast<int>(std::floor(pb->center.v));
    auto heat = t.heatmaps.data().subspan(static_cast<std::size_t>(box.class_id) * plane, plane);
    draw_gaussian(heat, width, height, cx, cy, pb->radius);

    if (cx < 0 || cx >= width || cy < 0 || cy >= height) {
      continue;
    }
    const std::size_t pix = static_cast<std::size_t>(cy) * w_n + static_cast<std::size_t>(cx);
    const double d = pb->center.d;
    bool take = d < owner_depth[pix];
    if (d == owner_depth[pix]) {
      const std::array<double, 3> stored{t.attributes[pix], t.attributes[plane + pix],
                                         t.attributes[2 * plane + pix]};
      const std::array<double, 3> mine{box.size.x(), box.size.y(), box.size.z()};
      take = mine < stored;
    }
    if (take) {
      owner_depth[pix] = d;
      for (std::size_t a = 0; a < 3; ++a) {
        t.attributes[a * plane + pix] = box.size[static_cast<Eigen::Index>(a)];
      }
      t.attr_mask[pix] = 1.0;
    }
  }
  return t;
}

std::optional<double> ray_box_entry_depth(const Box3D& box, const CameraModel& cam, double u,
                                          double v) {
  const auto& k = cam.intrinsics;
  const auto& e = cam.extrinsics;
  // Ray in the camera frame parametrized by depth: p(t) = t * (x, y, 1).
  const Vec3 dir{(u - k.cu) / k.fu, (v - k.cv) / k.fv, 1.0};
  const Mat3 axes_c = e.rotation * box.axes();
  const Vec3 center_c = e.apply(box.center.vec());
  const Vec3 o_local = axes_c.transpose() * (-center_c);
  const Vec3 d_local = axes_c.transpose() * dir;
  const Vec3 half = box.size * 0.5;

  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d_local[i]) < 1e-15) {
      if (std::abs(o_local[i]) > half[i]) {
        return std::nullopt;
      }
      continue;
    }
    double t0 = (-half[i] - o_local[i]) / d_local[i];
    double t1 = (half[i] - o_local[i]) / d_local[i];
    if (t0 > t1) {
      std::swap(t0, t1);
    }
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
  }
  if (t_near > t_far || t_near <= 0.0) {
    return std::nullopt;
  }
  return t_near;
}

DepthTargets build_depth_targets(const SceneAnnotation& scene, const CameraModel& cam,
                                 double stride, int width, int height, DepthMode mode) {
  if (width < 1 || height < 1 || !(stride > 0.0)) {
    throw ValidationError("build_depth_targets: invalid grid");
  }
  const auto w_n = static_cast<std::size_t>(width);
  const auto h_n = static_cast<std::size_t>(height);
  DepthTargets out{Tensor({h_n, w_n}), Tensor({h_n, w_n}), mode};
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> best(w_n * h_n, inf);

  for (const Box3D& box : scene.boxes) {
    const double center_depth = cam.extrinsics.apply(box.center.vec()).z();
    if (center_depth <= kMinCenterDepth) {
      continue;
    }
    // Footprint: bounding rectangle of the projected corners in front of the camera.
    double u_lo = inf, u_hi = -inf, v_lo = inf, v_hi = -inf;
    for (const Vec3& corner : box.corners()) {
      if (cam.extrinsics.apply(corner).z() <= kMinCenterDepth) {
        continue;
      }
      const PixelPoint q = project(EgoPoint::from(corner), cam);
      u_lo = std::min(u_lo, q.u / stride);
      u_hi = std::max(u_hi, q.u / stride);
      v_lo = std::min(v_lo, q.v / stride);
      v_hi = std::max(v_hi, q.v / stride);
    }
    if (!(u_hi >= u_lo)) {
      continue;
    }
    const int w0 = std::max(0, static_cast<int>(std::ceil(u_lo - 0.5)));
    const int w1 = std::min(width - 1, static_cast<int>(std::floor(u_hi - 0.5)));
    const int h0 = std::max(0, static_cast<int>(std::ceil(v_lo - 0.5)));
    const int h1 = std::min(height - 1, static_cast<int>(std::floor(v_hi - 0.5)));
    for (int h = h0; h <= h1; ++h) {
      for (int w = w0; w <= w1; ++w) {
        const std::size_t pix = static_cast<std::size_t>(h) * w_n + static_cast<std::size_t>(w);
        double d = center_depth;
        if (mode == DepthMode::surface) {
          const auto hit = ray_box_entry_depth(box, cam, (w + 0.5) * stride, (h + 0.5) * stride);
          if (!hit) {
            continue;
          }
          d = *hit;
        }
        best[pix] = std::min(best[pix], d);
      }
    }
  }
  for (std::size_t pix = 0; pix < best.size(); ++pix) {
    if (best[pix] < inf) {
      out.depth[pix] = best[pix];
      out.mask[pix] = 1.0;
    }
  }
  return out;
}

}  // namespace bevdebias
