#pragma once

#include <filesystem>

#include "bevdebias/tensor.hpp"

namespace bevdebias {

/// Writes an (H, W) grid as 8-bit binary PGM, linearly scaled from [0, max]
/// (negative values clip to 0). The scale goes to a sibling "<stem>.scale.json".
/// Returns the scale path.
std::filesystem::path emit_heatmap_image(const Tensor& grid, const std::filesystem::path& path);

}  // namespace bevdebias
