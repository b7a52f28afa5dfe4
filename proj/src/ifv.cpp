#include "bevdebias/ifv.hpp"

#include <algorithm>
#include <cmath>

#include "bevdebias/error.hpp"

namespace bevdebias {

namespace {

std::size_t cells_along(double lo, double hi, double cell, const char* axis) {
  const double n = (hi - lo) / cell;
  const double rounded = std::round(n);
  if (!(hi > lo) || !(cell > 0.0) || std::abs(n - rounded) > 1e-9 || rounded < 1.0) {
    throw ValidationError(std::string("grid: ") + axis +
                          " span is not a positive integer multiple of the cell size");
  }
  return static_cast<std::size_t>(rounded);
}

}  // namespace

std::size_t GridSpec::nx() const { return cells_along(x_min, x_max, cell_size, "x"); }
std::size_t GridSpec::ny() const { return cells_along(y_min, y_max, cell_size, "y"); }

void GridSpec::validate() const {
  (void)nx();
  (void)ny();
  if (nz == 0 || !(z_max > z_min)) {
    throw ValidationError("grid: z range must be increasing with at least one cell");
  }
}

double sigmoid(double t) {
  if (t >= 0.0) {
    return 1.0 / (1.0 + std::exp(-t));
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

IFVolume lift_to_ifv(const BEVGrid& bev, const HeightLogits& h) {
  if (bev.features.rank() != 3 || h.logits.rank() != 3) {
    throw DimensionError("lift_to_ifv: expected features (C,X,Y) and logits (Z,X,Y)");
  }
  if (!(bev.grid == h.grid)) {
    throw DimensionError("lift_to_ifv: BEV grid and height logits use different grid specs");
  }
  const std::size_t c_n = bev.features.dim(0);
  const std::size_t x_n = bev.features.dim(1);
  const std::size_t y_n = bev.features.dim(2);
  const std::size_t z_n = h.logits.dim(0);
  if (h.logits.dim(1) != x_n || h.logits.dim(2) != y_n) {
    throw DimensionError("lift_to_ifv: BEV features and height logits differ in X or Y");
  }
  if (x_n != bev.grid.nx() || y_n != bev.grid.ny() || z_n != bev.grid.nz) {
    throw DimensionError("lift_to_ifv: tensor shapes disagree with the grid spec");
  }

  IFVolume vol{Tensor({c_n, z_n, x_n, y_n}), bev.grid};
  const std::size_t plane = x_n * y_n;
  std::vector<double> gate(h.logits.size());
  std::transform(h.logits.data().begin(), h.logits.data().end(), gate.begin(), sigmoid);

  auto out = vol.values.data();
  const auto feat = bev.features.data();
  for (std::size_t c = 0; c < c_n; ++c) {
    const double* f = feat.data() + c * plane;
    for (std::size_t z = 0; z < z_n; ++z) {
      const double* g = gate.data() + z * plane;
      double* o = out.data() + (c * z_n + z) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        o[i] = g[i] * f[i];
      }
    }
  }
  return vol;
}

EgoPoint voxel_center(const VoxelIndex& idx, const GridSpec& grid) {
  if (idx.x >= grid.nx() || idx.y >= grid.ny() || idx.z >= grid.nz) {
    throw DimensionError("voxel_center: index out of range");
  }
  return {grid.x_min + (static_cast<double>(idx.x) + 0.5) * grid.cell_size,
          grid.y_min + (static_cast<double>(idx.y) + 0.5) * grid.cell_size,
          grid.z_min + (static_cast<double>(idx.z) + 0.5) * grid.z_cell()};
}

std::optional<VoxelIndex> nearest_voxel(const EgoPoint& p, const GridSpec& grid) {
  if (!grid.contains(p.x, p.y, p.z)) {
    return std::nullopt;
  }
  auto cell = [](double v, double lo, double size, std::size_t n) {
    const auto i = static_cast<std::size_t>(std::floor((v - lo) / size));
    return std::min(i, n - 1);
  };
  return VoxelIndex{cell(p.z, grid.z_min, grid.z_cell(), grid.nz),
                    cell(p.x, grid.x_min, grid.cell_size, grid.nx()),
                    cell(p.y, grid.y_min, grid.cell_size, grid.ny())};
}

}  // namespace bevdebias
