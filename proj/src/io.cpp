#include "bevdebias/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>

#include "bevdebias/error.hpp"

namespace bevdebias {

namespace fs = std::filesystem;

namespace {

template <typename T>
T field(const Json& j, const char* key, const std::string& what) {
  if (!j.is_object() || !j.contains(key)) {
    throw FormatError(what + ": missing field '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw FormatError(what + ": bad field '" + key + "': " + e.what());
  }
}

Vec3 vec3_field(const Json& j, const char* key, const std::string& what) {
  const auto v = field<std::vector<double>>(j, key, what);
  if (v.size() != 3) {
    throw FormatError(what + ": field '" + key + "' must have 3 entries");
  }
  return {v[0], v[1], v[2]};
}

Json vec3_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

}  // namespace

void check_format_version(const Json& doc, const std::string& what) {
  const auto version = field<std::string>(doc, "format_version", what);
  const auto dot = version.find('.');
  if (version.substr(0, dot) != "1") {
    throw FormatError(what + ": unsupported format_version '" + version + "'");
  }
}

fs::path write_tensor(const fs::path& path, const Tensor& t, const Json& meta) {
  fs::path blob = path;
  blob.replace_extension(".bin");
  Json header = {{"format_version", kFormatVersion},
                 {"dtype", "f32"},
                 {"order", "row-major"},
                 {"shape", t.shape()},
                 {"blob", blob.filename().string()},
                 {"meta", meta}};
  write_json(path, header);

  std::vector<char> bytes(t.size() * 4);
  for (std::size_t i = 0; i < t.size(); ++i) {
    auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(t[i]));
    for (std::size_t b = 0; b < 4; ++b) {
      bytes[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xffU);
    }
  }
  std::ofstream out(blob, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw IoError("cannot write " + blob.string());
  }
  return blob;
}

TensorFile read_tensor(const fs::path& path) {
  const Json header = read_json(path);
  const std::string what = "tensor " + path.string();
  check_format_version(header, what);
  if (field<std::string>(header, "dtype", what) != "f32" ||
      field<std::string>(header, "order", what) != "row-major") {
    throw FormatError(what + ": only row-major f32 is supported");
  }
  const auto shape = field<std::vector<std::size_t>>(header, "shape", what);
  const fs::path blob = path.parent_path() / field<std::string>(header, "blob", what);
  std::ifstream in(blob, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + blob.string());
  }
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Tensor t(shape);
  if (bytes.size() != t.size() * 4) {
    throw FormatError(what + ": blob size does not match shape");
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::uint32_t bits = 0;
    for (std::size_t b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i * 4 + b])) << (8 * b);
    }
    t[i] = std::bit_cast<float>(bits);
  }
  return {std::move(t), header.value("meta", Json::object())};
}

void write_json(const fs::path& path, const Json& doc) {
  std::ofstream out(path);
  out << doc.dump(2) << '\n';
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
}

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Json camera_to_json(const CameraModel& cam) {
  const auto& k = cam.intrinsics;
  const auto& e = cam.extrinsics;
  std::vector<double> rot;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      rot.push_back(e.rotation(r, c));
    }
  }
  return {{"name", cam.name},
          {"intrinsics",
           {{"fu", k.fu}, {"fv", k.fv}, {"cu", k.cu}, {"cv", k.cv},
            {"width", k.width}, {"height", k.height}}},
          {"extrinsics", {{"rotation", rot}, {"translation", vec3_json(e.translation)}}}};
}

CameraModel camera_from_json(const Json& j) {
  const std::string what = "camera";
  CameraModel cam;
  cam.name = j.value("name", "");
  const Json k = field<Json>(j, "intrinsics", what);
  cam.intrinsics = {field<double>(k, "fu", what),    field<double>(k, "fv", what),
                    field<double>(k, "cu", what),    field<double>(k, "cv", what),
                    field<int>(k, "width", what), field<int>(k, "height", what)};
  cam.intrinsics.validate();
  const Json e = field<Json>(j, "extrinsics", what);
  const auto rot = field<std::vector<double>>(e, "rotation", what);
  if (rot.size() != 9) {
    throw FormatError("camera: rotation must have 9 row-major entries");
  }
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      cam.extrinsics.rotation(r, c) = rot[static_cast<std::size_t>(r * 3 + c)];
    }
  }
  cam.extrinsics.translation = vec3_field(e, "translation", what);
  cam.extrinsics.validate();
  return cam;
}

Json rig_to_json(const std::vector<CameraModel>& rig) {
  Json cams = Json::array();
  for (const auto& c : rig) {
    cams.push_back(camera_to_json(c));
  }
  return {{"format_version", kFormatVersion}, {"cameras", cams}};
}

std::vector<CameraModel> rig_from_json(const Json& j) {
  check_format_version(j, "rig");
  std::vector<CameraModel> rig;
  for (const Json& c : field<Json>(j, "cameras", "rig")) {
    rig.push_back(camera_from_json(c));
  }
  return rig;
}

Json grid_to_json(const GridSpec& g) {
  return {{"x_range", {g.x_min, g.x_max}},
          {"y_range", {g.y_min, g.y_max}},
          {"z_range", {g.z_min, g.z_max}},
          {"cell_size", g.cell_size},
          {"nz", g.nz}};
}

GridSpec grid_from_json(const Json& j) {
  const auto range = [&](const char* key) {
    const auto r = field<std::vector<double>>(j, key, "grid");
    if (r.size() != 2) {
      throw FormatError(std::string("grid: '") + key + "' must be [lo, hi]");
    }
    return r;
  };
  GridSpec g;
  const auto x = range("x_range"), y = range("y_range"), z = range("z_range");
  g.x_min = x[0];
  g.x_max = x[1];
  g.y_min = y[0];
  g.y_max = y[1];
  g.z_min = z[0];
  g.z_max = z[1];
  g.cell_size = field<double>(j, "cell_size", "grid");
  g.nz = field<std::size_t>(j, "nz", "grid");
  g.validate();
  return g;
}

Json box_to_json(const Box3D& b) {
  return {{"center", vec3_json(b.center.vec())},
          {"size", vec3_json(b.size)},
          {"yaw", b.yaw},
          {"class", b.class_id}};
}

Box3D box_from_json(const Json& j) {
  Box3D b;
  b.center = EgoPoint::from(vec3_field(j, "center", "box"));
  b.size = vec3_field(j, "size", "box");
  b.yaw = field<double>(j, "yaw", "box");
  b.class_id = field<int>(j, "class", "box");
  b.validate();
  return b;
}

Json scene_to_json(const SceneAnnotation& s) {
  Json boxes = Json::array();
  for (const auto& b : s.boxes) {
    boxes.push_back(box_to_json(b));
  }
  return {{"format_version", kFormatVersion},
          {"boxes", boxes},
          {"rig", rig_to_json(s.rig)},
          {"seed", s.seed}};
}

SceneAnnotation scene_from_json(const Json& j) {
  check_format_version(j, "scene");
  SceneAnnotation s;
  for (const Json& b : field<Json>(j, "boxes", "scene")) {
    s.boxes.push_back(box_from_json(b));
  }
  if (j.contains("rig")) {
    s.rig = rig_from_json(j.at("rig"));
  }
  s.seed = j.value("seed", std::uint64_t{0});
  return s;
}

Json detections_to_json(const std::vector<Detection>& dets) {
  Json arr = Json::array();
  for (const auto& d : dets) {
    Json e = box_to_json(d.box);
    e["score"] = d.score;
    arr.push_back(e);
  }
  return {{"format_version", kFormatVersion}, {"detections", arr}};
}

std::vector<Detection> detections_from_json(const Json& j) {
  check_format_version(j, "detections");
  std::vector<Detection> out;
  for (const Json& e : field<Json>(j, "detections", "detections")) {
    Detection d{box_from_json(e), field<double>(e, "score", "detection")};
    d.validate();
    out.push_back(d);
  }
  return out;
}

Json metrics_to_json(const MetricsReport& r) {
  Json table = Json::array();
  for (const auto& t : r.ap_table) {
    table.push_back({{"threshold", t.threshold}, {"ap", t.ap}});
  }
  return {{"format_version", kFormatVersion},
          {"mAP", r.mAP},
          {"mATE", r.mATE},
          {"mASE", r.mASE},
          {"mAOE", r.mAOE},
          {"nds_star", r.nds_star},
          {"ap_table", table},
          {"num_detections", r.num_detections},
          {"num_ground_truth", r.num_ground_truth},
          {"num_tp_matches", r.num_tp_matches}};
}

Json loss_report_to_json(const LossReport& r) {
  return {{"format_version", kFormatVersion},
          {"det", r.det},
          {"render", r.render},
          {"pg", r.pg},
          {"ps", r.ps},
          {"con", r.con},
          {"total", r.total}};
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error("sha256: digest init failed");
  }
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) {
      EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[md[i] >> 4];
    hex += kHex[md[i] & 0xf];
  }
  return hex;
}

}  // namespace bevdebias
