#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "bevdebias/error.hpp"
#include "bevdebias/image.hpp"
#include "bevdebias/io.hpp"
#include "bevdebias/simulator.hpp"

using namespace bevdebias;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "bevdebias_test_io" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

}  // namespace

TEST_CASE("tensor files round-trip at float precision") {
  const fs::path dir = scratch("tensor");
  Tensor t({2, 3, 4});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.1 * static_cast<double>(i) - 1.0;
  const fs::path blob = write_tensor(dir / "t.json", t, {{"axes", {"a", "b", "c"}}});
  CHECK(blob == dir / "t.bin");
  CHECK(fs::file_size(blob) == 24 * 4);
  const TensorFile back = read_tensor(dir / "t.json");
  CHECK(back.tensor.shape() == t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(back.tensor[i] == static_cast<double>(static_cast<float>(t[i])));
  }
  CHECK(back.meta.at("axes").at(2) == "c");
  const Json header = read_json(dir / "t.json");
  CHECK(header.at("format_version") == "1.0");
  CHECK(header.at("blob") == "t.bin");
  CHECK(header.at("dtype") == "f32");
}

TEST_CASE("tensor blobs are little-endian float32") {
  const fs::path dir = scratch("endian");
  Tensor t({2});
  t[0] = 1.0;
  t[1] = -2.0;
  (void)write_tensor(dir / "e.json", t);
  CHECK(slurp(dir / "e.bin") == std::string("\x00\x00\x80\x3f\x00\x00\x00\xc0", 8));
}

TEST_CASE("readers reject unknown major versions and broken files") {
  const fs::path dir = scratch("version");
  (void)write_tensor(dir / "v.json", Tensor({3}, 1.0));
  Json header = read_json(dir / "v.json");
  header["format_version"] = "1.7";
  write_json(dir / "v.json", header);
  CHECK_NOTHROW((void)read_tensor(dir / "v.json"));
  header["format_version"] = "2.0";
  write_json(dir / "v.json", header);
  CHECK_THROWS_AS((void)read_tensor(dir / "v.json"), FormatError);
  header.erase("format_version");
  write_json(dir / "v.json", header);
  CHECK_THROWS_AS((void)read_tensor(dir / "v.json"), FormatError);

  header["format_version"] = "1.0";
  header["shape"] = {4};
  write_json(dir / "v.json", header);
  CHECK_THROWS_AS((void)read_tensor(dir / "v.json"), FormatError);

  spit(dir / "bad.json", "{not json");
  CHECK_THROWS_AS((void)read_json(dir / "bad.json"), FormatError);
  CHECK_THROWS_AS((void)read_json(dir / "missing.json"), IoError);
  CHECK_THROWS_AS((void)rig_from_json({{"format_version", "3.0"}, {"cameras", Json::array()}}),
                  FormatError);
}

TEST_CASE("JSON output has sorted keys") {
  const fs::path dir = scratch("sorted");
  write_json(dir / "s.json", {{"zeta", 1}, {"alpha", 2}, {"mid", {{"y", 1}, {"b", 2}}}});
  const std::string text = slurp(dir / "s.json");
  CHECK(text.find("alpha") < text.find("mid"));
  CHECK(text.find("mid") < text.find("zeta"));
  CHECK(text.find("\"b\"") < text.find("\"y\""));
  CHECK(text.back() == '\n');
}

TEST_CASE("rig, scene and detections round-trip") {
  SceneSpec spec;
  spec.seed = 12;
  spec.num_classes = 3;
  const SceneAnnotation s = generate_scene(spec, make_rig(RigPreset::lyft));
  const SceneAnnotation back = scene_from_json(scene_to_json(s));
  CHECK(back.seed == 12);
  REQUIRE(back.boxes.size() == s.boxes.size());
  for (std::size_t i = 0; i < s.boxes.size(); ++i) {
    CHECK(back.boxes[i].center.vec() == s.boxes[i].center.vec());
    CHECK(back.boxes[i].size == s.boxes[i].size);
    CHECK(back.boxes[i].yaw == s.boxes[i].yaw);
    CHECK(back.boxes[i].class_id == s.boxes[i].class_id);
  }
  REQUIRE(back.rig.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(back.rig[i].name == s.rig[i].name);
    CHECK(back.rig[i].intrinsics.fu == s.rig[i].intrinsics.fu);
    CHECK(back.rig[i].intrinsics.cv == s.rig[i].intrinsics.cv);
    CHECK(back.rig[i].extrinsics.rotation == s.rig[i].extrinsics.rotation);
    CHECK(back.rig[i].extrinsics.translation == s.rig[i].extrinsics.translation);
  }

  const auto dets = as_detections(s.boxes, 0.25);
  const auto dback = detections_from_json(detections_to_json(dets));
  REQUIRE(dback.size() == dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    CHECK(dback[i].score == 0.25);
    CHECK(dback[i].box.center.vec() == dets[i].box.center.vec());
  }

  Json broken = scene_to_json(s);
  broken["boxes"][0]["size"] = {1.0, 2.0};
  CHECK_THROWS_AS((void)scene_from_json(broken), FormatError);
  broken = scene_to_json(s);
  broken["boxes"][0]["size"] = {-1.0, 2.0, 1.0};
  CHECK_THROWS_AS((void)scene_from_json(broken), ValidationError);
}

TEST_CASE("grid spec round-trip") {
  GridSpec g;
  g.x_min = -25.6;
  g.x_max = 25.6;
  g.cell_size = 0.2;
  g.nz = 20;
  g.y_min = -25.6;
  g.y_max = 25.6;
  CHECK(grid_from_json(grid_to_json(g)) == g);
  Json j = grid_to_json(g);
  j.erase("nz");
  CHECK_THROWS_AS((void)grid_from_json(j), FormatError);
}

TEST_CASE("sha256 of a known string") {
  const fs::path dir = scratch("sha");
  spit(dir / "abc.txt", "abc");
  CHECK(sha256_file(dir / "abc.txt") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  spit(dir / "empty.txt", "");
  CHECK(sha256_file(dir / "empty.txt") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("heatmap images") {
  const fs::path dir = scratch("pgm");
  SUBCASE("golden 4x4") {
    Tensor g({4, 4});
    for (std::size_t i = 0; i < 16; ++i) g[i] = 0.5 * static_cast<double>(i);
    const fs::path scale = emit_heatmap_image(g, dir / "g.pgm");
    // 255 * v / 7.5 = 17 * i exactly.
    std::string expect = "P5\n4 4\n255\n";
    for (int i = 0; i < 16; ++i) expect.push_back(static_cast<char>(17 * i));
    CHECK(slurp(dir / "g.pgm") == expect);
    CHECK(scale == dir / "g.scale.json");
    const Json s = read_json(scale);
    CHECK(s.at("max") == 7.5);
    CHECK(s.at("min") == 0.0);
    CHECK(s.at("image") == "g.pgm");
  }
  SUBCASE("zero grid is black") {
    (void)emit_heatmap_image(Tensor({3, 5}), dir / "z.pgm");
    const std::string bytes = slurp(dir / "z.pgm");
    CHECK(bytes.substr(0, 11) == "P5\n5 3\n255\n");
    CHECK(bytes.substr(11) == std::string(15, '\0'));
  }
  SUBCASE("single peak is the only bright pixel") {
    Tensor g({3, 5});
    g(1, 3) = 0.02;
    (void)emit_heatmap_image(g, dir / "p.pgm");
    const std::string px = slurp(dir / "p.pgm").substr(11);
    for (std::size_t i = 0; i < px.size(); ++i) {
      CHECK(static_cast<unsigned char>(px[i]) == (i == 8 ? 255 : 0));
    }
  }
  SUBCASE("bad input") {
    CHECK_THROWS_AS((void)emit_heatmap_image(Tensor({4}), dir / "x.pgm"), DimensionError);
    Tensor nan({2, 2});
    nan[1] = std::nan("");
    CHECK_THROWS_AS((void)emit_heatmap_image(nan, dir / "x.pgm"), ValidationError);
  }
}
