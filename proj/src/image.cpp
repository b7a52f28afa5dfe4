#include "bevdebias/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "bevdebias/error.hpp"
#include "bevdebias/io.hpp"

namespace bevdebias {

std::filesystem::path emit_heatmap_image(const Tensor& grid, const std::filesystem::path& path) {
  if (grid.rank() != 2 || grid.size() == 0) {
    throw DimensionError("emit_heatmap_image: expected a non-empty (H, W) grid");
  }
  const std::size_t h = grid.dim(0), w = grid.dim(1);
  double max = 0.0;
  for (const double v : grid.data()) {
    if (!std::isfinite(v)) {
      throw ValidationError("emit_heatmap_image: non-finite value");
    }
    max = std::max(max, v);
  }
  std::vector<char> pixels(grid.size(), 0);
  if (max > 0.0) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double scaled = std::round(255.0 * std::max(0.0, grid[i]) / max);
      pixels[i] = static_cast<char>(static_cast<unsigned char>(scaled));
    }
  }
  std::ofstream out(path, std::ios::binary);
  const std::string header = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(pixels.data(), static_cast<std::streamsize>(pixels.size()));
  if (!out) {
    throw IoError("cannot write " + path.string());
  }

  std::filesystem::path scale = path;
  scale.replace_extension(".scale.json");
  write_json(scale, {{"format_version", kFormatVersion},
                     {"image", path.filename().string()},
                     {"min", 0.0},
                     {"max", max}});
  return scale;
}

}  // namespace bevdebias
