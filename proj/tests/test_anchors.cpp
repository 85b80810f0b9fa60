#include <doctest.h>

#include <cmath>
#include <set>
#include <stdexcept>

#include "assignkit/anchors.hpp"

using namespace assignkit;

namespace {

AnchorConfig single_level() {
  AnchorConfig c;
  c.strides = {8};
  c.scale = 8.0;
  c.ratios = {1.0};
  return c;
}

}  // namespace

TEST_CASE("single level grid over a 64x64 image") {
  const AnchorSet set = generate_anchors(single_level(), 64, 64);
  REQUIRE(set.size() == 64);
  REQUIRE(set.levels.size() == 1);
  CHECK(set.levels[0].grid_w == 8);
  CHECK(set.levels[0].grid_h == 8);
  CHECK(set.levels[0].offset == 0);
  CHECK(set.levels[0].count == 64);
  CHECK(set.num_ratios == 1);

  // First cell center (4,4), square side scale*stride = 64, unclipped.
  const Box& first = set.box(0);
  CHECK(first.x1 == -28.0);
  CHECK(first.y1 == -28.0);
  CHECK(first.x2 == 36.0);
  CHECK(first.y2 == 36.0);

  const Box& second = set.box(1);
  CHECK(second.center().x == 12.0);
  CHECK(second.center().y == 4.0);
}

TEST_CASE("two levels concatenate with offsets") {
  AnchorConfig c = single_level();
  c.strides = {8, 16};
  const AnchorSet set = generate_anchors(c, 64, 64);
  REQUIRE(set.size() == 80);
  REQUIRE(set.levels.size() == 2);
  CHECK(set.levels[0].count == 64);
  CHECK(set.levels[1].offset == 64);
  CHECK(set.levels[1].count == 16);
  CHECK(set.levels[1].stride == 16.0);
  CHECK(set.box(64).center().x == 8.0);
  CHECK(set.box(64).center().y == 8.0);
  CHECK(set.box(64).width() == 128.0);
}

TEST_CASE("grids round up for non-divisible images") {
  const AnchorSet set = generate_anchors(single_level(), 65, 60);
  CHECK(set.levels[0].grid_w == 9);
  CHECK(set.levels[0].grid_h == 8);
  CHECK(set.size() == 72);
}

TEST_CASE("ratios preserve area and set the aspect") {
  AnchorConfig c = single_level();
  c.ratios = {0.5, 1.0, 2.0};
  const AnchorSet set = generate_anchors(c, 32, 32);
  REQUIRE(set.size() == 16 * 3);
  CHECK(set.num_ratios == 3);
  const double base = c.scale * c.strides[0];
  for (int i = 0; i < set.size(); ++i) {
    const Box& b = set.box(i);
    const double r = c.ratios[static_cast<size_t>(i % 3)];
    CHECK(b.area() == doctest::Approx(base * base).epsilon(1e-9));
    CHECK(b.height() / b.width() == doctest::Approx(r).epsilon(1e-12));
  }
}

TEST_CASE("flat index is a bijection onto the anchor range") {
  AnchorConfig c = single_level();
  c.strides = {8, 16};
  c.ratios = {0.5, 2.0};
  const AnchorSet set = generate_anchors(c, 48, 40);
  std::set<int> seen;
  for (size_t lvl = 0; lvl < set.levels.size(); ++lvl) {
    const AnchorLevel& level = set.levels[lvl];
    for (int iy = 0; iy < level.grid_h; ++iy) {
      for (int ix = 0; ix < level.grid_w; ++ix) {
        for (int ri = 0; ri < set.num_ratios; ++ri) {
          const int idx = set.flat_index(static_cast<int>(lvl), ix, iy, ri);
          CHECK(idx >= 0);
          CHECK(idx < set.size());
          CHECK(seen.insert(idx).second);
          const Box& b = set.box(idx);
          CHECK(b.center().x ==
                doctest::Approx((ix + 0.5) * level.stride).epsilon(1e-12));
          CHECK(b.center().y ==
                doctest::Approx((iy + 0.5) * level.stride).epsilon(1e-12));
        }
      }
    }
  }
  CHECK(static_cast<int>(seen.size()) == set.size());

  CHECK_THROWS_AS(set.flat_index(0, -1, 0, 0), std::out_of_range);
  CHECK_THROWS_AS(set.flat_index(0, 0, 99, 0), std::out_of_range);
  CHECK_THROWS_AS(set.flat_index(0, 0, 0, 2), std::out_of_range);
  CHECK_THROWS_AS(set.flat_index(5, 0, 0, 0), std::out_of_range);
}

TEST_CASE("generation rejects bad configs") {
  AnchorConfig c = single_level();
  CHECK_THROWS_AS(generate_anchors(c, 0, 64), std::invalid_argument);
  CHECK_THROWS_AS(generate_anchors(c, 64, -1), std::invalid_argument);

  c.strides = {};
  CHECK_THROWS_AS(generate_anchors(c, 64, 64), std::invalid_argument);
  c.strides = {8, 8};
  CHECK_THROWS_AS(generate_anchors(c, 64, 64), std::invalid_argument);
  c.strides = {16, 8};
  CHECK_THROWS_AS(generate_anchors(c, 64, 64), std::invalid_argument);
  c.strides = {-8};
  CHECK_THROWS_AS(generate_anchors(c, 64, 64), std::invalid_argument);

  c = single_level();
  c.scale = 0;
  CHECK_THROWS_AS(generate_anchors(c, 64, 64), std::invalid_argument);

  c = single_level();
  c.ratios = {1.0, 0.0};
  CHECK_THROWS_AS(generate_anchors(c, 64, 64), std::invalid_argument);
  c.ratios = {};
  CHECK_THROWS_AS(generate_anchors(c, 64, 64), std::invalid_argument);
}

TEST_CASE("default config covers five levels") {
  const AnchorConfig c;
  REQUIRE(c.strides.size() == 5);
  CHECK(c.strides[0] == 8.0);
  CHECK(c.strides[4] == 128.0);
  CHECK(c.scale == 8.0);
  REQUIRE(c.ratios.size() == 1);
  const AnchorSet set = generate_anchors(c, 256, 256);
  int expected = 0;
  for (double s : c.strides) {
    const int g = static_cast<int>(std::ceil(256.0 / s));
    expected += g * g;
  }
  CHECK(set.size() == expected);
}
