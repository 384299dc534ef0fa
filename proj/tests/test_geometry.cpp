#include <catch2/catch_amalgamated.hpp>

#include "hoikit/core/rng.hpp"
#include "hoikit/geometry.hpp"

using namespace hoikit;

TEST_CASE("iou hand values") {
  const Box a{0.0, 0.0, 0.5, 0.5};
  REQUIRE(iou(a, a) == 1.0);
  REQUIRE(iou(a, Box{0.5, 0.5, 1.0, 1.0}) == 0.0);  // touching corners
  // half-overlap: inter 0.125, union 0.375
  REQUIRE(iou(a, Box{0.25, 0.0, 0.75, 0.5}) == Catch::Approx(1.0 / 3.0).margin(1e-15));
}

TEST_CASE("null boxes have zero iou with everything") {
  const Box null{};
  REQUIRE(null.is_null());
  REQUIRE(iou(null, null) == 0.0);
  REQUIRE(iou(null, Box{0.1, 0.1, 0.9, 0.9}) == 0.0);
}

TEST_CASE("box validity") {
  REQUIRE(Box{0.1, 0.1, 0.5, 0.5}.valid());
  REQUIRE_FALSE(Box{0.5, 0.1, 0.1, 0.5}.valid());   // inverted
  REQUIRE_FALSE(Box{-0.1, 0.1, 0.5, 0.5}.valid());  // out of frame
  REQUIRE_FALSE(Box{0.1, 0.1, 1.2, 0.5}.valid());
  REQUIRE_FALSE(Box{}.valid());  // the null sentinel is not a valid region
}

TEST_CASE("union rectangle spans both boxes") {
  const Box u = union_rect(Box{0.1, 0.2, 0.3, 0.4}, Box{0.25, 0.1, 0.6, 0.35});
  REQUIRE(u == Box{0.1, 0.1, 0.6, 0.4});
}

TEST_CASE("cell rasterization follows the center-in-box rule") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const int h = rng.uniform_int(2, 12), w = rng.uniform_int(2, 12);
    const double x1 = rng.uniform(0.0, 0.6), y1 = rng.uniform(0.0, 0.6);
    const Box b{x1, y1, x1 + rng.uniform(0.1, 0.39), y1 + rng.uniform(0.1, 0.39)};
    const auto mask = cells_in_box(b, h, w);
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        const double cx = (j + 0.5) / w, cy = (i + 0.5) / h;
        const bool inside = cx >= b.x1 && cx < b.x2 && cy >= b.y1 && cy < b.y2;
        REQUIRE(bool(mask[std::size_t(i) * w + j]) == inside);
      }
  }
}

TEST_CASE("union mask is the elementwise or of the two box masks") {
  const Box a{0.0, 0.0, 0.4, 0.4}, b{0.5, 0.5, 1.0, 1.0};
  const auto mu = cells_in_union(a, b, 8, 8);
  const auto ma = cells_in_box(a, 8, 8), mb = cells_in_box(b, 8, 8);
  for (std::size_t i = 0; i < mu.size(); ++i) REQUIRE(mu[i] == (ma[i] | mb[i]));
}
