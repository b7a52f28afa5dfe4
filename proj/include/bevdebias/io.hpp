#pragma once

// File formats. Every JSON document carries "format_version"; readers accept
// major version 1 only.
//
// Tensors are a JSON header plus a sibling raw blob of little-endian float32
// in row-major order:
//   {"format_version":"1.0","dtype":"f32","order":"row-major","shape":[...],
//    "blob":"name.bin","meta":{...}}

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "bevdebias/ifv.hpp"
#include "bevdebias/losses.hpp"
#include "bevdebias/metrics.hpp"
#include "bevdebias/scene.hpp"
#include "bevdebias/tensor.hpp"

namespace bevdebias {

using Json = nlohmann::json;

inline constexpr const char* kFormatVersion = "1.0";

/// Throws FormatError when the field is missing or its major is not 1.
void check_format_version(const Json& doc, const std::string& what);

/// Writes `<path>` (header) and `<path stem>.bin`. Returns the blob path.
std::filesystem::path write_tensor(const std::filesystem::path& path, const Tensor& t,
                                   const Json& meta = Json::object());

struct TensorFile {
  Tensor tensor;
  Json meta;
};

[[nodiscard]] TensorFile read_tensor(const std::filesystem::path& path);

/// Pretty-printed with sorted keys and a trailing newline.
void write_json(const std::filesystem::path& path, const Json& doc);
[[nodiscard]] Json read_json(const std::filesystem::path& path);

[[nodiscard]] Json camera_to_json(const CameraModel& cam);
[[nodiscard]] CameraModel camera_from_json(const Json& j);

/// {"format_version", "cameras": [...]}
[[nodiscard]] Json rig_to_json(const std::vector<CameraModel>& rig);
[[nodiscard]] std::vector<CameraModel> rig_from_json(const Json& j);

/// {"x_range", "y_range", "z_range", "cell_size", "nz"}; all keys required.
[[nodiscard]] Json grid_to_json(const GridSpec& g);
[[nodiscard]] GridSpec grid_from_json(const Json& j);

[[nodiscard]] Json box_to_json(const Box3D& b);
[[nodiscard]] Box3D box_from_json(const Json& j);

/// {"format_version", "boxes": [...], "rig": <rig JSON>, "seed"}
[[nodiscard]] Json scene_to_json(const SceneAnnotation& s);
[[nodiscard]] SceneAnnotation scene_from_json(const Json& j);

/// {"format_version", "detections": [{box fields..., "score"}]}
[[nodiscard]] Json detections_to_json(const std::vector<Detection>& dets);
[[nodiscard]] std::vector<Detection> detections_from_json(const Json& j);

[[nodiscard]] Json metrics_to_json(const MetricsReport& r);
[[nodiscard]] Json loss_report_to_json(const LossReport& r);

/// Lowercase hex SHA-256 of a file's bytes.
[[nodiscard]] std::string sha256_file(const std::filesystem::path& path);

}  // namespace bevdebias
