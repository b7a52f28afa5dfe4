#include <doctest.h>

#include <cmath>

#include "bevdebias/error.hpp"
#include "bevdebias/ifv.hpp"
#include "bevdebias/rng.hpp"

using namespace bevdebias;

namespace {

GridSpec small_grid() {
  GridSpec g;
  g.x_min = -2.0;
  g.x_max = 2.0;
  g.y_min = -1.0;
  g.y_max = 2.0;
  g.cell_size = 1.0;
  g.z_min = -1.0;
  g.z_max = 3.0;
  g.nz = 4;
  return g;
}

std::pair<BEVGrid, HeightLogits> filled(const GridSpec& g, std::size_t c, double f, double l) {
  return {BEVGrid{Tensor({c, g.nx(), g.ny()}, f), g}, HeightLogits{Tensor({g.nz, g.nx(), g.ny()}, l), g}};
}

}  // namespace

TEST_CASE("zero logits halve the features") {
  const GridSpec g = small_grid();
  auto [bev, h] = filled(g, 2, 0.0, 0.0);
  Rng rng(1);
  for (double& v : bev.features.data()) v = rng.uniform(-3, 3);
  const IFVolume vol = lift_to_ifv(bev, h);
  CHECK(vol.values.shape() == std::vector<std::size_t>{2, 4, 4, 3});
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t z = 0; z < 4; ++z)
      for (std::size_t x = 0; x < 4; ++x)
        for (std::size_t y = 0; y < 3; ++y) CHECK(vol.values(c, z, x, y) == 0.5 * bev.features(c, x, y));
}

TEST_CASE("zero features give a zero volume") {
  auto [bev, h] = filled(small_grid(), 3, 0.0, 7.0);
  const IFVolume vol = lift_to_ifv(bev, h);
  for (const double v : vol.values.data()) CHECK(v == 0.0);
}

TEST_CASE("single column with mixed logits") {
  const GridSpec g = small_grid();
  auto [bev, h] = filled(g, 1, 0.0, 0.0);
  bev.features(0, 1, 2) = 2.0;
  h.logits(0, 1, 2) = -20.0;
  h.logits(1, 1, 2) = 20.0;
  const IFVolume vol = lift_to_ifv(bev, h);
  const double s20 = 1.0 / (1.0 + std::exp(-20.0));
  CHECK(vol.values(0, 0, 1, 2) == doctest::Approx(2.0 * (1.0 - s20)).epsilon(1e-12));
  CHECK(vol.values(0, 0, 1, 2) == doctest::Approx(4.1223e-9).epsilon(1e-4));
  CHECK(vol.values(0, 1, 1, 2) == doctest::Approx(2.0 * s20).epsilon(1e-15));
  CHECK(vol.values(0, 2, 1, 2) == 1.0);
  CHECK(vol.values(0, 3, 1, 2) == 1.0);
  CHECK(vol.values(0, 3, 1, 1) == 0.0);
}

TEST_CASE("sigmoid is stable at large magnitudes") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(sigmoid(-800.0) == 0.0);
  CHECK(std::isfinite(sigmoid(-1e308)));
}

TEST_CASE("shape and grid mismatches are rejected") {
  const GridSpec g = small_grid();
  auto [bev, h] = filled(g, 1, 1.0, 0.0);
  HeightLogits wrong_z{Tensor({3, g.nx(), g.ny()}), g};
  CHECK_THROWS_AS((void)lift_to_ifv(bev, wrong_z), DimensionError);
  HeightLogits wrong_xy{Tensor({g.nz, g.nx(), g.ny() + 1}), g};
  CHECK_THROWS_AS((void)lift_to_ifv(bev, wrong_xy), DimensionError);
  GridSpec other = g;
  other.z_max = 4.0;
  HeightLogits other_grid{h.logits, other};
  CHECK_THROWS_AS((void)lift_to_ifv(bev, other_grid), DimensionError);
  BEVGrid flat{Tensor({g.nx(), g.ny()}), g};
  CHECK_THROWS_AS((void)lift_to_ifv(flat, h), DimensionError);
}

TEST_CASE("grid spans must be whole multiples of the cell") {
  GridSpec g;
  CHECK(g.nx() == 128);
  CHECK(g.ny() == 128);
  g.cell_size = 0.3;
  CHECK_THROWS_AS(g.validate(), ValidationError);
  GridSpec z = small_grid();
  z.nz = 0;
  CHECK_THROWS_AS(z.validate(), ValidationError);
}

TEST_CASE("voxel centers on the default grid") {
  const GridSpec g;
  const double cell = 100.0 / 128.0;
  const EgoPoint first = voxel_center({0, 0, 0}, g);
  CHECK(first.x == doctest::Approx(-50.0 + 0.5 * cell));
  CHECK(first.y == doctest::Approx(-50.0 + 0.5 * cell));
  CHECK(first.z == doctest::Approx(-0.5));
  const EgoPoint last = voxel_center({3, 127, 127}, g);
  CHECK(last.x == doctest::Approx(50.0 - 0.5 * cell));
  CHECK(last.x == doctest::Approx(-first.x));
  CHECK(last.z == doctest::Approx(2.5));
  CHECK_THROWS_AS((void)voxel_center({0, 128, 0}, g), DimensionError);
  CHECK_THROWS_AS((void)voxel_center({4, 0, 0}, g), DimensionError);
}

TEST_CASE("nearest voxel inverts voxel_center") {
  const GridSpec g;
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const VoxelIndex idx{rng.below(g.nz), rng.below(g.nx()), rng.below(g.ny())};
    const auto back = nearest_voxel(voxel_center(idx, g), g);
    REQUIRE(back.has_value());
    CHECK(*back == idx);
  }
  CHECK_FALSE(nearest_voxel({60, 0, 0}, g).has_value());
  CHECK_FALSE(nearest_voxel({0, 0, 3.5}, g).has_value());
}
