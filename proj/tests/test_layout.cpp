#include "doctest.h"
#include "spatial/layout.hpp"

using namespace spatial;

TEST_CASE("z-order coordinates") {
  CHECK(zorder_coord(0, 2) == Coord{0, 0});
  CHECK(zorder_coord(1, 2) == Coord{0, 1});
  CHECK(zorder_coord(2, 2) == Coord{1, 0});
  CHECK(zorder_coord(3, 2) == Coord{1, 1});
  CHECK(zorder_coord(4, 4) == Coord{0, 2});
  CHECK(zorder_coord(15, 4) == Coord{3, 3});
  CHECK(zorder_rank({1, 1}, 2) == 3);
  CHECK(zorder_rank({0, 2}, 4) == 4);
  CHECK_THROWS(zorder_coord(0, 3));
  CHECK_THROWS(zorder_coord(16, 4));
  CHECK_THROWS(zorder_rank({4, 0}, 4));
}

TEST_CASE("index maps are bijections up to side 64") {
  for (std::uint64_t side = 1; side <= 64; side *= 2) {
    for (std::uint64_t i = 0; i < side * side; ++i) {
      REQUIRE(zorder_rank(zorder_coord(i, side), side) == i);
      REQUIRE(rowmajor_rank(rowmajor_coord(i, side, side), side, side) == i);
    }
  }
  CHECK(rowmajor_coord(5, 2, 4) == Coord{1, 1});
  CHECK(rowmajor_coord(0, 3, 7) == Coord{0, 0});
  for (std::uint64_t i = 0; i < 8; ++i) CHECK(rowmajor_rank(rowmajor_coord(i, 2, 4), 2, 4) == i);
  CHECK_THROWS(rowmajor_coord(8, 2, 4));
}

TEST_CASE("aligned z-order blocks occupy contiguous intervals") {
  const std::uint64_t side = 16;
  for (std::uint64_t b = 1; b <= side; b *= 2)
    for (std::uint64_t r0 = 0; r0 < side; r0 += b)
      for (std::uint64_t c0 = 0; c0 < side; c0 += b) {
        std::uint64_t lo = ~0ULL, hi = 0;
        for (std::uint64_t r = r0; r < r0 + b; ++r)
          for (std::uint64_t c = c0; c < c0 + b; ++c) {
            auto i = zorder_rank({std::int32_t(r), std::int32_t(c)}, side);
            lo = std::min(lo, i);
            hi = std::max(hi, i);
          }
        REQUIRE(hi - lo + 1 == b * b);
        REQUIRE(lo % (b * b) == 0);
      }
}

TEST_CASE("route_permutation") {
  PermutationPlan id{{0, 1, 2, 3}, LayoutKind::row_major(2, 2)};
  CHECK(audit(route_permutation(id, {2, 2, {}})).energy == 0);

  for (auto [h, w] : {std::pair{4, 4}, {3, 9}, {9, 3}, {6, 6}, {2, 12}}) {
    PermutationPlan rev{{}, LayoutKind::row_major(h, w)};
    for (std::uint64_t i = 0; i < std::uint64_t(h * w); ++i) rev.target.push_back(h * w - 1 - i);
    auto t = route_permutation(rev, {h, w, {}});
    auto l = audit(t);
    CHECK(l.energy == reversal_energy(h, w));
    std::uint64_t lo = std::max(h, w), hi = std::min(h, w);
    CHECK(9 * l.energy >= lo * lo * hi);
    CHECK(l.depth == 1);
    CHECK(validate(t, {}).empty());
    if (h == 4 && w == 4) CHECK(l.energy == 64);
  }

  // Same permutation on a Z-order layout: identical distance sum.
  PermutationPlan z{{}, LayoutKind::zorder(4)};
  PermutationPlan r{{}, LayoutKind::row_major(4, 4)};
  for (std::uint64_t i = 0; i < 16; ++i) {
    const auto dst = zorder_rank(rowmajor_coord(15 - rowmajor_rank(zorder_coord(i, 4), 4, 4), 4, 4), 4);
    z.target.push_back(dst);
  }
  for (std::uint64_t i = 0; i < 16; ++i) r.target.push_back(15 - i);
  CHECK(audit(route_permutation(z, {4, 4, {}})).energy == audit(route_permutation(r, {4, 4, {}})).energy);

  PermutationPlan bad{{0, 0, 1, 2}, LayoutKind::row_major(2, 2)};
  CHECK_THROWS_AS(route_permutation(bad, {2, 2, {}}), std::invalid_argument);
}
