#pragma once

// Implicit foreground volume: a height-free BEV grid gated per height cell by
// sigmoid(height logits).

#include <cstddef>
#include <optional>

#include "bevdebias/geometry.hpp"
#include "bevdebias/tensor.hpp"

namespace bevdebias {

/// Metric layout shared by BEV grids, height logits and volumes.
/// Cells are centered: cell i spans [min + i*cell, min + (i+1)*cell).
struct GridSpec {
  double x_min = -50.0;
  double x_max = 50.0;
  double y_min = -50.0;
  double y_max = 50.0;
  double cell_size = 100.0 / 128.0;
  double z_min = -1.0;
  double z_max = 3.0;
  std::size_t nz = 4;

  [[nodiscard]] std::size_t nx() const;
  [[nodiscard]] std::size_t ny() const;
  [[nodiscard]] double z_cell() const { return (z_max - z_min) / static_cast<double>(nz); }

  /// Throws ValidationError unless ranges are increasing and each span is an
  /// integer multiple of the cell size (to 1e-9).
  void validate() const;

  [[nodiscard]] bool contains(double x, double y, double z) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max && z >= z_min && z <= z_max;
  }

  bool operator==(const GridSpec&) const = default;
};

struct BEVGrid {
  Tensor features;  // (C, X, Y)
  GridSpec grid;
};

struct HeightLogits {
  Tensor logits;  // (Z, X, Y)
  GridSpec grid;
};

struct IFVolume {
  Tensor values;  // (C, Z, X, Y)
  GridSpec grid;

  [[nodiscard]] std::size_t channels() const { return values.dim(0); }
};

struct VoxelIndex {
  std::size_t z = 0;
  std::size_t x = 0;
  std::size_t y = 0;

  bool operator==(const VoxelIndex&) const = default;
};

/// 1 / (1 + exp(-t)), evaluated without overflow for large |t|.
[[nodiscard]] double sigmoid(double t);

/// values[c,z,x,y] = sigmoid(logits[z,x,y]) * features[c,x,y].
/// Throws DimensionError on shape or grid mismatch.
[[nodiscard]] IFVolume lift_to_ifv(const BEVGrid& bev, const HeightLogits& h);

/// Metric center of a voxel. Throws DimensionError for out-of-range indices.
[[nodiscard]] EgoPoint voxel_center(const VoxelIndex& idx, const GridSpec& grid);

/// Voxel containing p, or nullopt outside the grid.
[[nodiscard]] std::optional<VoxelIndex> nearest_voxel(const EgoPoint& p, const GridSpec& grid);

}  // namespace bevdebias
